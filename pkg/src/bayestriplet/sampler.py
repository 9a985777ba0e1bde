"""Draws triplet companions from the tracked class distributions.

Anchors are the real embedded rows of the mini-batch; positives and
negatives are fresh Gaussian draws from the per-class states, so each
anchor's companions explore the space around its class rather than reusing
batch instances. For every anchor there are (c - 1) positives from its own
class and one negative from each of the other classes, in ascending class
id order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .data import EmbeddingBatch
from .distributions import GaussianParams, mvn_sample
from .linalg import regularize_psd
from .tracker import ClassState


class UninitializedClass(KeyError):
    pass


@dataclass
class AnchorGroup:
    """One anchor with its sampled companions."""

    anchor: np.ndarray  # (d,)
    anchor_label: int
    positives: np.ndarray  # (c-1, d)
    negatives: np.ndarray  # (c-1, d), one per other class
    negative_labels: np.ndarray  # (c-1,), ascending class ids


@dataclass
class TripletBatch:
    """All anchor groups of one mini-batch, in batch order."""

    groups: tuple[AnchorGroup, ...]

    def __len__(self) -> int:
        return len(self.groups)

    def anchors(self) -> np.ndarray:
        return np.stack([g.anchor for g in self.groups])

    def anchor_labels(self) -> np.ndarray:
        return np.array([g.anchor_label for g in self.groups])

    def positives(self) -> np.ndarray:
        return np.stack([g.positives for g in self.groups])

    def negatives(self) -> np.ndarray:
        return np.stack([g.negatives for g in self.groups])


def sample_triplets(embeddings: EmbeddingBatch, states: Mapping[int, ClassState],
                    rng: np.random.Generator, eps_scale: float = 1e-6) -> TripletBatch:
    """Sample companions for every anchor in the batch.

    `states` must hold an initialized state for every class that appears in
    the batch; class covariances are jittered before factoring so degenerate
    early-stream scatters still sample. Draw order is fixed (anchors in batch
    order, positives before negatives, negatives by ascending class id), so a
    seeded generator reproduces the batch bit for bit.
    """
    class_ids = sorted(states)
    if len(class_ids) < 2:
        raise ValueError("triplet sampling needs at least two tracked classes")
    missing = set(np.unique(embeddings.labels)) - set(class_ids)
    if missing:
        raise UninitializedClass(f"no state for classes {sorted(missing)}")

    params = {
        j: GaussianParams(states[j].mean0, regularize_psd(states[j].cov0, eps_scale))
        for j in class_ids
    }
    num_other = len(class_ids) - 1

    groups = []
    for anchor, label in zip(embeddings.vectors, embeddings.labels):
        label = int(label)
        positives = np.stack([mvn_sample(params[label], rng) for _ in range(num_other)])
        neg_ids = [j for j in class_ids if j != label]
        negatives = np.stack([mvn_sample(params[j], rng) for j in neg_ids])
        groups.append(
            AnchorGroup(
                anchor=np.array(anchor, dtype=float),
                anchor_label=label,
                positives=positives,
                negatives=negatives,
                negative_labels=np.array(neg_ids),
            )
        )
    return TripletBatch(groups=tuple(groups))
