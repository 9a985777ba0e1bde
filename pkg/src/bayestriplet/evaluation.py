"""Recall@k and nearest-neighbor retrieval over an embedded, labeled set.

Search is exhaustive (the sets here are small); distance ordering uses
squared Euclidean distances in full float64, which preserves both the order
and the ties of true Euclidean distances. Ties are broken by ascending index
via a stable sort.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np


class KTooLarge(ValueError):
    pass


@dataclass
class EmbeddedSet:
    vectors: np.ndarray  # (m, d)
    labels: np.ndarray  # (m,)

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=float)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.vectors.ndim != 2 or self.vectors.shape[0] != self.labels.shape[0]:
            raise ValueError("vectors must be (m, d) with one label per row")
        if self.vectors.shape[0] < 2:
            raise ValueError("need at least two points")
        if not np.all(np.isfinite(self.vectors)):
            raise ValueError("vectors must be finite")

    @property
    def size(self) -> int:
        return self.vectors.shape[0]


def _sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # exact pairwise differences, chunked to bound the (chunk, m, d) temporary
    out = np.empty((a.shape[0], b.shape[0]))
    chunk = max(1, 2**22 // (max(b.shape[0], 1) * max(a.shape[1], 1)))
    for start in range(0, a.shape[0], chunk):
        diff = a[start:start + chunk, None, :] - b[None, :, :]
        out[start:start + chunk] = (diff**2).sum(-1)
    return out


def recall_at_k(es: EmbeddedSet, ks: Iterable[int]) -> dict[int, float]:
    """Fraction of points whose k nearest neighbors (self excluded) contain
    at least one point of the same class, for each requested k."""
    ks = [int(k) for k in ks]
    if any(k < 1 for k in ks):
        raise KTooLarge("every k must be >= 1")
    if max(ks) >= es.size:
        raise KTooLarge(f"k={max(ks)} leaves no {max(ks)} neighbors in a set of {es.size}")
    dists = _sq_dists(es.vectors, es.vectors)
    np.fill_diagonal(dists, np.inf)
    order = np.argsort(dists, axis=1, kind="stable")
    neighbor_labels = es.labels[order[:, : max(ks)]]
    same = neighbor_labels == es.labels[:, None]
    return {k: float(same[:, :k].any(axis=1).mean()) for k in ks}


def retrieve_topk(es: EmbeddedSet, query: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k database points nearest to the query, closest first."""
    if not 1 <= k <= es.size:
        raise KTooLarge(f"k={k} outside [1, {es.size}]")
    query = np.asarray(query, dtype=float).reshape(1, -1)
    dists = _sq_dists(query, es.vectors)[0]
    return np.argsort(dists, kind="stable")[:k]
