"""Command line front end: train, eval, retrieve, synth.

Configuration comes from an optional flat key=value file plus flags, flags
winning. Exit codes: 0 success, 2 configuration problem, 3 data problem,
4 numeric failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from .data import DataError, save_idx, synth_blobs
from .distributions import DomainError, make_rng
from .harness import (
    RECALL_KS,
    ConfigError,
    TrainConfig,
    evaluate,
    retrieve,
    train,
)
from .linalg import DimensionMismatch, NotPositiveDefinite
from .mlp import CheckpointError

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

_BOOL_WORDS = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


def _parse_bool(raw: str) -> bool:
    try:
        return _BOOL_WORDS[raw.strip().lower()]
    except KeyError:
        raise ConfigError(f"expected a boolean, got {raw!r}") from None


def _parse_dims(raw: str) -> tuple[int, ...]:
    raw = raw.strip()
    if not raw:
        return ()
    try:
        return tuple(int(part) for part in raw.split(","))
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {raw!r}") from None


_CONFIG_PARSERS = {
    "dataset": str,
    "loss": str,
    "cov_mode": str,
    "embed_dim": int,
    "hidden_dims": _parse_dims,
    "n_per_class": int,
    "margin": float,
    "lr": float,
    "max_epochs": int,
    "patience": int,
    "seed": int,
    "eps_scale": float,
    "accumulate_across_epochs": _parse_bool,
    "normalize_embeddings": _parse_bool,
    "data_dir": str,
    "out_dir": str,
    "blob_classes": int,
    "blob_per_class": int,
    "blob_dim": int,
    "blob_spread": float,
    "train_limit": int,
    "test_limit": int,
}


def parse_config_file(path) -> dict:
    """Flat key=value lines; '#' starts a comment; unknown keys are errors."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in _CONFIG_PARSERS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _CONFIG_PARSERS[key](raw)
        except ConfigError:
            raise
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: bad value {raw!r} for {key}") from None
    return values


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--dataset", choices=["blobs", "mnist"])
    parser.add_argument("--loss", choices=["but", "bunca"])
    parser.add_argument("--cov-mode", dest="cov_mode", choices=["standard", "paper-literal"])
    parser.add_argument("--embed-dim", dest="embed_dim", type=int)
    parser.add_argument("--hidden-dims", dest="hidden_dims", type=_parse_dims,
                        help="comma-separated hidden layer sizes, e.g. 256 or 64,32")
    parser.add_argument("--n-per-class", dest="n_per_class", type=int)
    parser.add_argument("--margin", type=float)
    parser.add_argument("--lr", type=float)
    parser.add_argument("--max-epochs", dest="max_epochs", type=int)
    parser.add_argument("--patience", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--eps-scale", dest="eps_scale", type=float)
    parser.add_argument("--accumulate-across-epochs", dest="accumulate_across_epochs",
                        action=argparse.BooleanOptionalAction)
    parser.add_argument("--normalize-embeddings", dest="normalize_embeddings",
                        action=argparse.BooleanOptionalAction)
    parser.add_argument("--data-dir", dest="data_dir")
    parser.add_argument("--out-dir", dest="out_dir")
    parser.add_argument("--blob-classes", dest="blob_classes", type=int)
    parser.add_argument("--blob-per-class", dest="blob_per_class", type=int)
    parser.add_argument("--blob-dim", dest="blob_dim", type=int)
    parser.add_argument("--blob-spread", dest="blob_spread", type=float)
    parser.add_argument("--train-limit", dest="train_limit", type=int)
    parser.add_argument("--test-limit", dest="test_limit", type=int)


def build_config(args: argparse.Namespace) -> TrainConfig:
    values = {}
    if args.config:
        values.update(parse_config_file(args.config))
    for name in _CONFIG_PARSERS:
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
    cfg = TrainConfig(**values)
    cfg.validate()
    return cfg


def _parse_ks(raw: str) -> tuple[int, ...]:
    ks = _parse_dims(raw)
    if not ks:
        raise ConfigError("need at least one k")
    return ks


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="bayestriplet",
                                     description="Distribution-sampled triplet training")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run the training loop")
    _add_config_flags(p_train)

    p_eval = sub.add_parser("eval", help="Recall@k of a checkpoint on a split")
    _add_config_flags(p_eval)
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--split", default="test", choices=["train", "val", "test"])
    p_eval.add_argument("--ks", type=_parse_ks, default=RECALL_KS)

    p_ret = sub.add_parser("retrieve", help="nearest neighbors of one split instance")
    _add_config_flags(p_ret)
    p_ret.add_argument("--checkpoint", required=True)
    p_ret.add_argument("--split", default="test", choices=["train", "val", "test"])
    p_ret.add_argument("--query-index", dest="query_index", type=int, required=True)
    p_ret.add_argument("--k", type=int, default=10)

    p_synth = sub.add_parser("synth", help="write a synthetic blob dataset as IDX fixtures")
    p_synth.add_argument("--classes", type=int, default=3)
    p_synth.add_argument("--per-class", dest="per_class", type=int, default=100)
    p_synth.add_argument("--q", type=int, default=16)
    p_synth.add_argument("--spread", type=float, default=1.0)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--images-out", dest="images_out", required=True)
    p_synth.add_argument("--labels-out", dest="labels_out", required=True)

    args = parser.parse_args(argv)
    try:
        if args.command == "train":
            result = train(build_config(args))
            best = result.summary["best_val"]
            print(f"best epoch {result.summary['best_epoch']}: "
                  + " ".join(f"r{k}={best[f'r{k}']:.4f}" for k in RECALL_KS))
            print(f"checkpoint: {result.summary['checkpoint']}")
        elif args.command == "eval":
            recalls = evaluate(args.checkpoint, build_config(args), args.split, args.ks)
            for k in args.ks:
                print(f"{k},{recalls[k]!r}")
        elif args.command == "retrieve":
            indices, dists, labels = retrieve(args.checkpoint, build_config(args),
                                              args.split, args.query_index, args.k)
            print("rank,index,label,distance")
            for rank, (idx, label, dist) in enumerate(zip(indices, labels, dists)):
                print(f"{rank},{idx},{label},{dist:.6f}")
        elif args.command == "synth":
            rng = make_rng(args.seed)
            ds = synth_blobs(args.classes, args.per_class, args.q, args.spread, rng)
            # squashed into [0, 1] so the values survive the byte container
            lo, hi = ds.inputs.min(), ds.inputs.max()
            ds.inputs = (ds.inputs - lo) / max(hi - lo, 1e-12)
            save_idx(ds, args.images_out, args.labels_out)
            print(f"wrote {len(ds)} instances to {args.images_out} / {args.labels_out}")
    except (ConfigError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, FileNotFoundError, CheckpointError, IndexError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NotPositiveDefinite, DomainError, DimensionMismatch, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


if __name__ == "__main__":
    sys.exit(main())
