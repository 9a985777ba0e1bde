"""Fetch the four MNIST IDX files into the data directory.

Tries the common mirrors in order and decompresses the .gz payloads. The
target directory is the first of: --data-dir, $BAYESTRIPLET_DATA_DIR, ./data.
"""

import argparse
import gzip
import os
import sys
import urllib.error
import urllib.request
from pathlib import Path

MIRRORS = [
    "https://ossci-datasets.s3.amazonaws.com/mnist/",
    "https://storage.googleapis.com/cvdf-datasets/mnist/",
]
FILES = [
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
]


def fetch(name: str, dest: Path) -> None:
    target = dest / name
    if target.exists():
        print(f"{target} already present")
        return
    last_error = None
    for mirror in MIRRORS:
        url = f"{mirror}{name}.gz"
        try:
            print(f"fetching {url}")
            with urllib.request.urlopen(url, timeout=60) as response:
                payload = gzip.decompress(response.read())
            target.write_bytes(payload)
            print(f"wrote {target} ({len(payload)} bytes)")
            return
        except (urllib.error.URLError, OSError) as exc:
            last_error = exc
            print(f"  failed: {exc}")
    raise SystemExit(f"could not fetch {name}: {last_error}")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--data-dir", default=None)
    args = parser.parse_args()
    dest = Path(args.data_dir or os.environ.get("BAYESTRIPLET_DATA_DIR") or "data")
    dest.mkdir(parents=True, exist_ok=True)
    for name in FILES:
        fetch(name, dest)
    print("done")


if __name__ == "__main__":
    sys.exit(main())
