import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bayestriplet.losses import nca_loss, triplet_loss
from conftest import batch_from_arrays, numeric_grad, random_batch


def naive_triplet_value(anchors, positives, negatives, margin):
    total = 0.0
    for i in range(anchors.shape[0]):
        for k in range(positives.shape[1]):
            for l in range(negatives.shape[1]):
                d_pos = np.sum((anchors[i] - positives[i, k]) ** 2)
                d_neg = np.sum((anchors[i] - negatives[i, l]) ** 2)
                total += max(margin + d_pos - d_neg, 0.0)
    return total


def naive_nca_terms(anchors, positives, negatives):
    terms = []
    for i in range(anchors.shape[0]):
        denom = sum(
            np.exp(-np.sum((anchors[i] - neg) ** 2)) for neg in negatives[i]
        )
        for k in range(positives.shape[1]):
            numer = np.exp(-np.sum((anchors[i] - positives[i, k]) ** 2))
            terms.append(-np.log(numer / denom))
    return terms


# ---------------------------------------------------------------- triplet


def test_triplet_all_coincident_gives_margin_per_pairing():
    b, c, d, margin = 3, 4, 2, 0.25
    point = np.ones((b, d))
    batch = batch_from_arrays(point, np.ones((b, c - 1, d)), np.ones((b, c - 1, d)))
    out = triplet_loss(batch, margin)
    assert out.value == pytest.approx(b * (c - 1) ** 2 * margin)
    # brackets equal the margin exactly, deviations are all zero
    np.testing.assert_array_equal(out.positive_grads, 0.0)
    np.testing.assert_array_equal(out.negative_grads, 0.0)


def test_triplet_inactive_term():
    batch = batch_from_arrays(
        np.array([[0.0, 0.0]]), np.array([[[1.0, 0.0]]]), np.array([[[3.0, 0.0]]])
    )
    out = triplet_loss(batch, 0.25)
    assert out.value == 0.0
    np.testing.assert_array_equal(out.anchor_grads, 0.0)
    np.testing.assert_array_equal(out.positive_grads, 0.0)
    np.testing.assert_array_equal(out.negative_grads, 0.0)


def test_triplet_active_term_hand_value():
    batch = batch_from_arrays(
        np.array([[0.0, 0.0]]), np.array([[[1.0, 0.0]]]), np.array([[[1.1, 0.0]]])
    )
    out = triplet_loss(batch, 0.25)
    assert out.value == pytest.approx(0.25 + 1.0 - 1.21, abs=1e-12)


def test_triplet_zero_bracket_is_inactive():
    # margin 0 and coincident points: bracket exactly zero, subgradient zero
    batch = batch_from_arrays(np.zeros((1, 2)), np.zeros((1, 1, 2)), np.zeros((1, 1, 2)))
    out = triplet_loss(batch, 0.0)
    assert out.value == 0.0
    np.testing.assert_array_equal(out.anchor_grads, 0.0)


def test_triplet_rejects_negative_margin(rng):
    with pytest.raises(ValueError):
        triplet_loss(random_batch(rng, 2, 3, 2), -0.1)


@settings(deadline=None, max_examples=40)
@given(seed=st.integers(0, 2**31 - 1), b=st.integers(1, 4), c=st.integers(2, 4),
       d=st.integers(1, 5))
def test_triplet_matches_bruteforce_and_nonnegative(seed, b, c, d):
    rng = np.random.default_rng(seed)
    batch = random_batch(rng, b, c, d)
    margin = float(rng.uniform(0.0, 0.5))
    out = triplet_loss(batch, margin)
    anchors, pos, neg = batch.anchors(), batch.positives(), batch.negatives()
    expected = naive_triplet_value(anchors, pos, neg, margin)
    assert out.value == pytest.approx(expected, rel=1e-12, abs=1e-12)
    assert out.value >= 0.0
    all_inactive = expected == 0.0
    assert (out.value == 0.0) == all_inactive


@settings(deadline=None, max_examples=25)
@given(seed=st.integers(0, 2**31 - 1))
def test_triplet_translation_invariance(seed):
    rng = np.random.default_rng(seed)
    batch = random_batch(rng, 3, 3, 4)
    shift = rng.standard_normal(4) * 5.0
    shifted = batch_from_arrays(
        batch.anchors() + shift, batch.positives() + shift, batch.negatives() + shift
    )
    base = triplet_loss(batch, 0.25).value
    moved = triplet_loss(shifted, 0.25).value
    assert moved == pytest.approx(base, abs=1e-10)


# ---------------------------------------------------------------- nca


def test_nca_equal_distances_single_negative():
    batch = batch_from_arrays(
        np.array([[0.0, 0.0]]), np.array([[[1.0, 0.0]]]), np.array([[[-1.0, 0.0]]])
    )
    assert nca_loss(batch).value == pytest.approx(0.0, abs=1e-12)


def test_nca_equal_distances_many_negatives():
    c = 5
    anchor = np.zeros((1, 2))
    positives = np.tile([1.0, 0.0], (1, c - 1, 1))
    # negatives all at distance 1 as well, different directions
    angles = np.linspace(0, 2 * np.pi, c - 1, endpoint=False)
    negatives = np.stack([np.cos(angles), np.sin(angles)], axis=1)[None, :, :]
    out = nca_loss(batch_from_arrays(anchor, positives, negatives))
    assert out.value == pytest.approx((c - 1) * np.log(c - 1), abs=1e-12)


def test_nca_hand_value():
    batch = batch_from_arrays(
        np.array([[0.0, 0.0]]), np.array([[[1.0, 0.0]]]), np.array([[[2.0, 0.0]]])
    )
    assert nca_loss(batch).value == pytest.approx(-3.0, abs=1e-12)


@settings(deadline=None, max_examples=40)
@given(seed=st.integers(0, 2**31 - 1), b=st.integers(1, 4), c=st.integers(2, 4),
       d=st.integers(1, 5))
def test_nca_matches_bruteforce_and_term_signs(seed, b, c, d):
    rng = np.random.default_rng(seed)
    batch = random_batch(rng, b, c, d)
    out = nca_loss(batch)
    anchors, pos, neg = batch.anchors(), batch.positives(), batch.negatives()
    terms = naive_nca_terms(anchors, pos, neg)
    assert out.value == pytest.approx(sum(terms), rel=1e-9, abs=1e-9)
    # sign characterization: term <= 0 iff exp(-d_pos) >= sum_l exp(-d_neg_l)
    idx = 0
    for i in range(b):
        denom = sum(np.exp(-np.sum((anchors[i] - x) ** 2)) for x in neg[i])
        for k in range(c - 1):
            numer = np.exp(-np.sum((anchors[i] - pos[i, k]) ** 2))
            assert (terms[idx] <= 1e-12) == (numer >= denom - 1e-12)
            idx += 1


@settings(deadline=None, max_examples=25)
@given(seed=st.integers(0, 2**31 - 1))
def test_nca_translation_invariance(seed):
    rng = np.random.default_rng(seed)
    batch = random_batch(rng, 3, 3, 4)
    shift = rng.standard_normal(4) * 5.0
    shifted = batch_from_arrays(
        batch.anchors() + shift, batch.positives() + shift, batch.negatives() + shift
    )
    assert nca_loss(shifted).value == pytest.approx(nca_loss(batch).value, abs=1e-10)


def test_nca_logsumexp_matches_naive_on_small_inputs(rng):
    batch = random_batch(rng, 4, 4, 3, scale=0.5)
    out = nca_loss(batch)
    naive = sum(naive_nca_terms(batch.anchors(), batch.positives(), batch.negatives()))
    assert out.value == pytest.approx(naive, abs=1e-9)


def test_nca_logsumexp_survives_huge_distances():
    batch = batch_from_arrays(
        np.array([[0.0, 0.0]]), np.array([[[40.0, 0.0]]]), np.array([[[50.0, 0.0]]])
    )
    out = nca_loss(batch)
    assert np.isfinite(out.value)
    assert out.value == pytest.approx(1600.0 - 2500.0, abs=1e-9)


# ---------------------------------------------------------------- gradients


def _fd_check(loss_fn, batch, rtol):
    anchors, pos, neg = batch.anchors(), batch.positives(), batch.negatives()
    out = loss_fn(batch)
    for name, arr, grads in (
        ("anchors", anchors, out.anchor_grads),
        ("positives", pos, out.positive_grads),
        ("negatives", neg, out.negative_grads),
    ):
        def value_of(x, which=name):
            parts = {"anchors": anchors, "positives": pos, "negatives": neg}
            parts[which] = x
            return loss_fn(batch_from_arrays(parts["anchors"], parts["positives"],
                                             parts["negatives"])).value

        fd = numeric_grad(value_of, arr.copy())
        scale = max(np.abs(fd).max(), 1.0)
        assert np.abs(grads - fd).max() / scale < rtol, name


def _hinge_safe_batch(rng, b, c, d, margin):
    # resample until no bracket sits within 1e-3 of the hinge
    while True:
        batch = random_batch(rng, b, c, d)
        d_pos = ((batch.anchors()[:, None, :] - batch.positives()) ** 2).sum(-1)
        d_neg = ((batch.anchors()[:, None, :] - batch.negatives()) ** 2).sum(-1)
        brackets = margin + d_pos[:, :, None] - d_neg[:, None, :]
        if np.abs(brackets).min() > 1e-3:
            return batch


def test_triplet_gradients_match_finite_differences(rng):
    margin = 0.25
    for _ in range(10):
        b, c, d = rng.integers(1, 5), rng.integers(2, 5), rng.integers(1, 7)
        batch = _hinge_safe_batch(rng, int(b), int(c), int(d), margin)
        _fd_check(lambda x: triplet_loss(x, margin), batch, 1e-5)


def test_nca_gradients_match_finite_differences(rng):
    for _ in range(10):
        b, c, d = rng.integers(1, 5), rng.integers(2, 5), rng.integers(1, 7)
        batch = random_batch(rng, int(b), int(c), int(d))
        _fd_check(nca_loss, batch, 1e-5)
