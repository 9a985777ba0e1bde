"""Shared test oracles: brute-force determinants, Bartlett Wishart draws,
finite differences, and triplet batch builders. Everything here is kept
independent of the library code paths it is used to check."""

import numpy as np
import pytest

from bayestriplet.sampler import AnchorGroup, TripletBatch


def rand_spd(rng, d, jitter=0.5):
    """Well-conditioned random SPD matrix."""
    b = rng.standard_normal((d, d))
    return b @ b.T + jitter * np.eye(d)


def det_bruteforce(a):
    """Determinant by cofactor expansion (for d <= 4 cross-checks)."""
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    if n == 1:
        return a[0, 0]
    total = 0.0
    for j in range(n):
        minor = np.delete(np.delete(a, 0, axis=0), j, axis=1)
        total += (-1.0) ** j * a[0, j] * det_bruteforce(minor)
    return total


def bartlett_wishart(scale, dof, rng, size):
    """Stacked Wishart draws via the Bartlett construction.

    Returns (size, d, d). Uses numpy primitives only so it stays an
    independent reference for the library's moment formulas.
    """
    d = scale.shape[0]
    chol_scale = np.linalg.cholesky(scale)
    a = np.zeros((size, d, d))
    rows, cols = np.tril_indices(d, k=-1)
    a[:, rows, cols] = rng.standard_normal((size, len(rows)))
    for i in range(d):
        a[:, i, i] = np.sqrt(rng.chisquare(dof - i, size=size))
    la = chol_scale @ a
    return la @ np.swapaxes(la, 1, 2)


def numeric_grad(fn, x, eps=1e-5):
    """Central finite differences of a scalar function over a flat array."""
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    flat = x.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = fn(x)
        flat[i] = orig - eps
        lo = fn(x)
        flat[i] = orig
        grad.ravel()[i] = (hi - lo) / (2.0 * eps)
    return grad


def batch_from_arrays(anchors, positives, negatives):
    """TripletBatch from stacked (b,d), (b,K,d), (b,K,d) arrays."""
    groups = []
    num_other = positives.shape[1]
    for i in range(anchors.shape[0]):
        groups.append(
            AnchorGroup(
                anchor=np.array(anchors[i]),
                anchor_label=0,
                positives=np.array(positives[i]),
                negatives=np.array(negatives[i]),
                negative_labels=np.arange(1, num_other + 1),
            )
        )
    return TripletBatch(groups=tuple(groups))


def random_batch(rng, b, c, d, scale=1.0):
    anchors = scale * rng.standard_normal((b, d))
    positives = scale * rng.standard_normal((b, c - 1, d))
    negatives = scale * rng.standard_normal((b, c - 1, d))
    return batch_from_arrays(anchors, positives, negatives)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
