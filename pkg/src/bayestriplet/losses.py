"""Triplet hinge loss and NCA softmax loss over sampled triplet batches.

Both objectives are plain sums over the batch (no mean reduction; the
learning rate absorbs the scale) and both return analytic gradients for
every vector involved. During training only the anchor gradients reach the
network, since positives and negatives are synthetic draws with no upstream
graph, but the companion gradients are computed anyway so the whole surface
can be checked against finite differences.

Distances are squared Euclidean throughout. With (c - 1) positives indexed
by k and (c - 1) negatives indexed by l per anchor i, the triplet objective
sums the hinge [margin + d(i,k) - d(i,l)]_+ over all b (c-1)^2 pairings, and
the NCA objective sums d(i,k) + log sum_l exp(-d(i,l)) over the b (c-1)
anchor-positive pairs (the softmax denominator runs over the negatives
only).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sampler import TripletBatch


@dataclass
class LossOutput:
    """Scalar objective plus gradients aligned with the triplet batch layout."""

    value: float
    anchor_grads: np.ndarray  # (b, d)
    positive_grads: np.ndarray  # (b, c-1, d)
    negative_grads: np.ndarray  # (b, c-1, d)


def _stacked(batch: TripletBatch) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return batch.anchors(), batch.positives(), batch.negatives()


def triplet_loss(batch: TripletBatch, margin: float) -> LossOutput:
    """Hinge loss over every positive/negative pairing of every anchor.

    A pairing is active when margin + d(i,k) - d(i,l) > 0; inactive pairings
    (including the exactly-zero boundary) contribute nothing to the value or
    the gradients.
    """
    if margin < 0:
        raise ValueError(f"margin must be >= 0, got {margin}")
    anchors, pos, neg = _stacked(batch)
    dev_pos = anchors[:, None, :] - pos  # (b, K, d)
    dev_neg = anchors[:, None, :] - neg
    d_pos = (dev_pos**2).sum(-1)  # (b, K)
    d_neg = (dev_neg**2).sum(-1)
    bracket = margin + d_pos[:, :, None] - d_neg[:, None, :]  # (b, K, K) over (k, l)
    active = bracket > 0.0
    value = float(bracket[active].sum()) if active.any() else 0.0

    k_count = active.sum(axis=2)  # active l's per (i, k)
    l_count = active.sum(axis=1)  # active k's per (i, l)
    positive_grads = -2.0 * k_count[..., None] * dev_pos
    negative_grads = 2.0 * l_count[..., None] * dev_neg
    # per active pairing the three gradients sum to zero
    anchor_grads = -(positive_grads.sum(axis=1) + negative_grads.sum(axis=1))
    return LossOutput(value, anchor_grads, positive_grads, negative_grads)


def nca_loss(batch: TripletBatch) -> LossOutput:
    """Softmax loss pushing each positive closer than the negatives.

    The log-sum-exp over negatives is evaluated with the usual max shift, so
    large squared distances cannot underflow the denominator.
    """
    anchors, pos, neg = _stacked(batch)
    num_pairs = pos.shape[1]
    dev_pos = anchors[:, None, :] - pos
    dev_neg = anchors[:, None, :] - neg
    d_pos = (dev_pos**2).sum(-1)
    d_neg = (dev_neg**2).sum(-1)

    shift = (-d_neg).max(axis=1, keepdims=True)
    weights = np.exp(-d_neg - shift)
    norm = weights.sum(axis=1, keepdims=True)
    log_denoms = (shift + np.log(norm))[:, 0]
    value = float(d_pos.sum() + num_pairs * log_denoms.sum())

    softmax = weights / norm  # (b, K) over negatives
    positive_grads = -2.0 * dev_pos
    negative_grads = 2.0 * num_pairs * softmax[..., None] * dev_neg
    anchor_grads = -(positive_grads.sum(axis=1) + negative_grads.sum(axis=1))
    return LossOutput(value, anchor_grads, positive_grads, negative_grads)
