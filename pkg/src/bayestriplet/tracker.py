"""Per-class streaming Gaussian state and its conjugate mini-batch updates.

Each class carries the pooled mean, the pooled scatter (sum of outer products
of deviations over everything consumed so far), and the instance count. The
scatter recursion

    merged = batch_scatter + old_scatter
             + n' n0 / (n' + n0) * outer(old_mean - batch_mean)

is exact, so the merged matrix always equals the brute-force scatter of the
concatenated data. The covariance actually used for triplet sampling is
derived from that merged matrix at every update; see :class:`CovMode` for the
two derivations.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .distributions import DomainError, InvWishartParams, MvtParams
from .linalg import DimensionMismatch, spd_inverse


class EmptySlice(ValueError):
    pass


class CovMode(enum.Enum):
    """How the sampling covariance is derived from the merged scatter.

    STANDARD divides the merged scatter by (count - d - 1), the posterior
    expectation that keeps sampled triplets at the scale of the data.
    PAPER_LITERAL reproduces the published form of the rule, which inverts
    the merged scatter before dividing; it shrinks as data accumulate and is
    kept only for fidelity experiments.
    """

    STANDARD = "standard"
    PAPER_LITERAL = "paper-literal"


@dataclass
class BatchSlice:
    """The embedded instances of one class inside one mini-batch."""

    class_id: int
    vectors: np.ndarray  # (n', d)

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=float)
        if self.vectors.ndim != 2 or self.vectors.shape[0] < 1:
            raise EmptySlice(f"class {self.class_id}: need an (n', d) block with n' >= 1")

    @property
    def n_prime(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def mean(self) -> np.ndarray:
        return self.vectors.mean(axis=0)

    def scatter(self) -> np.ndarray:
        dev = self.vectors - self.mean()
        return dev.T @ dev

    def mle_cov(self) -> np.ndarray:
        # biased estimator, divisor n'
        return self.scatter() / self.n_prime


@dataclass
class ClassState:
    """Streaming state of one class distribution.

    `mean0` and `scatter` are exact pooled statistics of every instance
    consumed so far; `cov0` is the covariance triplets are sampled from,
    re-derived on each update (it is rank-deficient until enough data have
    arrived, so consumers must regularize before factoring).
    """

    class_id: int
    mean0: np.ndarray
    cov0: np.ndarray
    n0: int
    scatter: np.ndarray


def init_mle(batch: BatchSlice) -> ClassState:
    """First-batch state: plain sample mean and biased sample covariance."""
    scatter = batch.scatter()
    return ClassState(
        class_id=batch.class_id,
        mean0=batch.mean(),
        cov0=scatter / batch.n_prime,
        n0=batch.n_prime,
        scatter=scatter,
    )


def _merged_scatter(state: ClassState, batch_mean: np.ndarray, batch_scatter: np.ndarray,
                    n_prime: int) -> np.ndarray:
    diff = state.mean0 - batch_mean
    weight = n_prime * state.n0 / (n_prime + state.n0)
    return batch_scatter + state.scatter + weight * np.outer(diff, diff)


def bayes_update(state: ClassState, batch: BatchSlice,
                 mode: CovMode = CovMode.STANDARD) -> ClassState:
    """Fold one mini-batch slice into the class state.

    The pooled mean is the count-weighted average of the old mean and the
    batch mean. While the total count is still <= d + 1 the sampling
    covariance falls back to the batch's own biased sample covariance;
    afterwards it comes from the merged scatter per `mode`.
    """
    if batch.class_id != state.class_id:
        raise ValueError(f"slice is for class {batch.class_id}, state tracks {state.class_id}")
    if batch.dim != state.mean0.shape[0]:
        raise DimensionMismatch(
            f"slice vectors have dim {batch.dim}, state has dim {state.mean0.shape[0]}"
        )
    if state.n0 < 1:
        raise ValueError("state has no accumulated data; use init_mle for the first batch")

    n0, n_prime = state.n0, batch.n_prime
    total = n0 + n_prime
    batch_mean = batch.mean()
    upsilon = _merged_scatter(state, batch_mean, batch.scatter(), n_prime)
    new_mean = (n_prime * batch_mean + n0 * state.mean0) / total

    d = batch.dim
    if total > d + 1:
        denom = total - d - 1
        if mode is CovMode.STANDARD:
            cov0 = upsilon / denom
        else:
            cov0 = spd_inverse(upsilon) / denom
    else:
        cov0 = batch.mle_cov()

    return ClassState(state.class_id, new_mean, cov0, total, upsilon)


def posterior_marginals(state: ClassState, batch_mean: np.ndarray, batch_cov: np.ndarray,
                        n_prime: int) -> tuple[MvtParams, InvWishartParams]:
    """Marginal posteriors of the class mean and covariance after one batch.

    The mean marginal is a multivariate Student-t centered on the updated
    pooled mean; the covariance marginal is an inverse Wishart on the
    inverted merged scatter with dof n' + n0. Both are computed from the
    pre-update state plus the batch statistics (mean, biased covariance, n').
    """
    batch_mean = np.asarray(batch_mean, dtype=float).reshape(-1)
    batch_cov = np.asarray(batch_cov, dtype=float)
    d = state.mean0.shape[0]
    if batch_mean.shape[0] != d:
        raise DimensionMismatch(f"batch mean has length {batch_mean.shape[0]}, state dim is {d}")
    if n_prime < 1:
        raise EmptySlice("n_prime must be >= 1")

    n0 = state.n0
    total = n_prime + n0
    t_dof = total - d + 1
    if t_dof <= 0:
        raise DomainError(f"mean marginal needs n' + n0 - d + 1 > 0, got {t_dof}")

    diff = state.mean0 - batch_mean
    weight = n_prime * n0 / total
    upsilon = n_prime * batch_cov + state.scatter + weight * np.outer(diff, diff)
    eta = (n_prime * batch_mean + n0 * state.mean0) / total

    mean_marginal = MvtParams(mean=eta, shape=upsilon / (total * t_dof), dof=t_dof)
    cov_marginal = InvWishartParams(scale=spd_inverse(upsilon), dof=total)
    return mean_marginal, cov_marginal
