"""Dense SPD kernels: Cholesky factorization, solves, log-determinant, jitter.

Symmetric matrices are plain float64 numpy arrays here. A Cholesky factor is
the lower-triangular array returned by :func:`cholesky`; the functions that
consume one take it as-is, so the (cheap) factorization is paid once per
matrix no matter how many solves follow.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import lapack, solve_triangular


class NotPositiveDefinite(ArithmeticError):
    """Cholesky pivot failure. Carries the 1-based index of the bad pivot."""

    def __init__(self, pivot: int):
        super().__init__(f"matrix is not positive definite (pivot {pivot})")
        self.pivot = int(pivot)


class DimensionMismatch(ValueError):
    pass


def symmetrize(a: np.ndarray) -> np.ndarray:
    """Exactly symmetric copy of a square matrix (averages the triangles)."""
    a = np.asarray(a, dtype=float)
    return 0.5 * (a + a.T)


def cholesky(a: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor L with L @ L.T == a.

    Raises NotPositiveDefinite with the failing pivot index instead of a
    generic LinAlgError, so callers can regularize and retry.
    """
    a = np.ascontiguousarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    c, info = lapack.dpotrf(a, lower=1, clean=1)
    if info > 0:
        raise NotPositiveDefinite(info)
    if info < 0:
        raise ValueError(f"illegal argument {-info} passed to dpotrf")
    return c


def spd_logdet(lower: np.ndarray) -> float:
    """log det of the matrix whose lower Cholesky factor is `lower`."""
    return 2.0 * float(np.sum(np.log(np.diag(lower))))


def spd_solve(lower: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Solve A y = x given the lower Cholesky factor of A.

    `x` may be a vector or a matrix of stacked right-hand-side columns.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[0] != lower.shape[0]:
        raise DimensionMismatch(
            f"rhs has leading dimension {x.shape[0]}, factor is {lower.shape[0]}x{lower.shape[0]}"
        )
    y = solve_triangular(lower, x, lower=True)
    return solve_triangular(lower.T, y, lower=False)


def spd_inverse(a: np.ndarray) -> np.ndarray:
    """Inverse of an SPD matrix via its Cholesky factor, re-symmetrized."""
    lower = cholesky(a)
    return symmetrize(spd_solve(lower, np.eye(lower.shape[0])))


def regularize_psd(a: np.ndarray, eps_scale: float = 1e-6) -> np.ndarray:
    """Add diagonal jitter so a symmetric PSD matrix factors.

    The jitter is eps_scale times the mean diagonal magnitude, with an
    absolute floor of eps_scale itself, so zero and rank-deficient inputs
    (single-vector scatters, for instance) come out positive definite.
    """
    if eps_scale <= 0:
        raise ValueError("eps_scale must be positive")
    a = np.asarray(a, dtype=float)
    d = a.shape[0]
    eps = eps_scale * max(float(np.trace(a)) / d, 1.0)
    return a + eps * np.eye(d)
