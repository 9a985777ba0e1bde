"""IDX image/label ingestion, synthetic Gaussian blobs, balanced batching."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


class DataError(Exception):
    pass


class BadMagic(DataError):
    pass


class TruncatedFile(DataError):
    pass


class CountMismatch(DataError):
    pass


class InsufficientClassInstances(DataError):
    pass


@dataclass
class Dataset:
    """Row-major inputs with dense integer labels in [0, num_classes)."""

    inputs: np.ndarray  # (n, q) float64
    labels: np.ndarray  # (n,) int64
    num_classes: int

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=float)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.inputs.ndim != 2 or self.inputs.shape[0] != self.labels.shape[0]:
            raise DataError("inputs must be (n, q) with one label per row")
        counts = np.bincount(self.labels, minlength=self.num_classes)
        if self.labels.min(initial=0) < 0 or len(counts) != self.num_classes or (counts == 0).any():
            raise DataError(f"labels must densely cover [0, {self.num_classes})")

    def __len__(self) -> int:
        return self.inputs.shape[0]


@dataclass
class EmbeddingBatch:
    """A class-balanced batch of embedded vectors: exactly n' rows per class."""

    vectors: np.ndarray  # (b, d)
    labels: np.ndarray  # (b,)
    per_class: int

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=float)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.vectors.ndim != 2 or self.vectors.shape[0] != self.labels.shape[0]:
            raise DataError("vectors must be (b, d) with one label per row")
        _, counts = np.unique(self.labels, return_counts=True)
        if (counts != self.per_class).any():
            raise DataError(f"every class in a batch must appear exactly {self.per_class} times")

    @property
    def size(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def _read_exact(f, n: int, path: str, what: str) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise TruncatedFile(f"{path}: expected {n} bytes of {what}, got {len(buf)}")
    return buf


def _read_u32be(f, path: str, what: str) -> int:
    return struct.unpack(">I", _read_exact(f, 4, path, what))[0]


def load_idx(images_path, labels_path) -> Dataset:
    """Load an IDX image/label file pair into a flat float dataset.

    IDX layout (all integers big-endian u32): magic 0x00000803 for images
    followed by count, rows, cols and row-major pixel bytes; magic
    0x00000801 for labels followed by count and label bytes. Pixels are
    scaled to [0, 1].
    """
    images_path, labels_path = str(images_path), str(labels_path)
    with open(images_path, "rb") as f:
        magic = _read_u32be(f, images_path, "magic")
        if magic != IMAGE_MAGIC:
            raise BadMagic(f"{images_path}: magic 0x{magic:08x}, expected 0x{IMAGE_MAGIC:08x}")
        n = _read_u32be(f, images_path, "count")
        rows = _read_u32be(f, images_path, "rows")
        cols = _read_u32be(f, images_path, "cols")
        pixels = np.frombuffer(_read_exact(f, n * rows * cols, images_path, "pixels"), dtype=np.uint8)
    with open(labels_path, "rb") as f:
        magic = _read_u32be(f, labels_path, "magic")
        if magic != LABEL_MAGIC:
            raise BadMagic(f"{labels_path}: magic 0x{magic:08x}, expected 0x{LABEL_MAGIC:08x}")
        n_labels = _read_u32be(f, labels_path, "count")
        labels = np.frombuffer(_read_exact(f, n_labels, labels_path, "labels"), dtype=np.uint8)
    if n != n_labels:
        raise CountMismatch(f"{n} images but {n_labels} labels")
    inputs = pixels.reshape(n, rows * cols).astype(float) / 255.0
    labels = labels.astype(np.int64)
    return Dataset(inputs=inputs, labels=labels, num_classes=int(labels.max()) + 1)


def save_idx(ds: Dataset, images_path, labels_path, image_shape: tuple[int, int] | None = None) -> None:
    """Write a dataset whose inputs lie in [0, 1] to an IDX file pair.

    Values are quantized to bytes with round(v * 255), so inputs already on
    the 1/255 grid round-trip exactly through :func:`load_idx`.
    """
    inputs, labels = ds.inputs, ds.labels
    if inputs.min() < 0.0 or inputs.max() > 1.0:
        raise DataError("inputs must lie in [0, 1] to be written as IDX bytes")
    q = inputs.shape[1]
    rows, cols = image_shape if image_shape is not None else (1, q)
    if rows * cols != q:
        raise DataError(f"image shape {rows}x{cols} does not match input width {q}")
    pixels = np.rint(inputs * 255.0).astype(np.uint8)
    with open(images_path, "wb") as f:
        f.write(struct.pack(">IIII", IMAGE_MAGIC, len(ds), rows, cols))
        f.write(pixels.tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">II", LABEL_MAGIC, len(ds)))
        f.write(labels.astype(np.uint8).tobytes())


def synth_blobs(num_classes: int, per_class: int, q: int, spread: float,
                rng: np.random.Generator) -> Dataset:
    """Isotropic Gaussian blobs with well-separated class centroids.

    Centroids are drawn in a cube wide enough that pairwise distances are
    typically many times `spread`; draws are rejected until every pair is at
    least 4 * spread apart, so nearest-centroid classification of the result
    is nearly perfect. Deterministic for a given generator state.
    """
    if num_classes < 2:
        raise DataError("need at least two classes")
    if per_class < 1:
        raise DataError("need at least one instance per class")
    half_width = 6.0 * spread * num_classes ** (1.0 / q)
    for _ in range(1000):
        centroids = rng.uniform(-half_width, half_width, size=(num_classes, q))
        diffs = centroids[:, None, :] - centroids[None, :, :]
        dist = np.sqrt((diffs**2).sum(-1))
        np.fill_diagonal(dist, np.inf)
        if dist.min() >= 4.0 * spread:
            break
        half_width *= 1.25
    else:
        raise DataError("could not place separated centroids")
    inputs = np.concatenate(
        [c + spread * rng.standard_normal((per_class, q)) for c in centroids]
    )
    labels = np.repeat(np.arange(num_classes), per_class)
    return Dataset(inputs=inputs, labels=labels, num_classes=num_classes)


def balanced_batches(ds: Dataset, n_prime: int, rng: np.random.Generator) -> list[np.ndarray]:
    """One epoch of class-balanced index batches, n_prime rows per class.

    Each class's indices are shuffled and consumed without replacement;
    batches are emitted until the smallest class runs out, so leftovers are
    dropped for the epoch (the next epoch reshuffles).
    """
    counts = np.bincount(ds.labels, minlength=ds.num_classes)
    if (counts < n_prime).any():
        short = int(np.argmin(counts))
        raise InsufficientClassInstances(
            f"class {short} has {counts[short]} instances, need at least {n_prime}"
        )
    perms = [rng.permutation(np.flatnonzero(ds.labels == j)) for j in range(ds.num_classes)]
    num_batches = int(counts.min()) // n_prime
    return [
        np.concatenate([perm[t * n_prime:(t + 1) * n_prime] for perm in perms])
        for t in range(num_batches)
    ]
