import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_probs
from loss_oracles import (central_diff, gwp_termwise, kl, pixel_termwise, region_termwise,
                          rel_err)

from shapeseed.errors import DimensionError, ParameterError
from shapeseed.grid import IGNORE, normalize_scores
from shapeseed.losses import (LossParams, classification_loss, gwp_class_scores,
                              labels_from_classes, lambda_schedule, pixel_loss, region_loss,
                              total_loss)

P = LossParams()


def test_params_defaults_and_validation():
    assert (P.epsilon, P.region_radius, P.margin, P.kl_floor) == (1e-5, 3, 3.0, 1e-8)
    for bad in (dict(epsilon=0.0), dict(margin=0.0), dict(region_radius=0), dict(kl_floor=0.0)):
        with pytest.raises(ParameterError):
            LossParams(**bad)


# -- pooling ----------------------------------------------------------------

def test_gwp_constant_field():
    s = np.broadcast_to(np.array([1.0, -0.5, 2.0]), (5, 4, 3)).copy()
    m = normalize_scores(s)[0, 0]
    v = gwp_class_scores(s, P)
    n = 20
    np.testing.assert_allclose(v, s[0, 0] * n * m / (P.epsilon + n * m), rtol=1e-14)
    np.testing.assert_allclose(gwp_class_scores(s, LossParams(epsilon=1e-300)), s[0, 0], rtol=1e-14)


def test_gwp_single_pixel_extended_precision():
    mpmath.mp.dps = 50
    s = [mpmath.mpf(1), mpmath.mpf(3)]
    z = sum(mpmath.exp(x) for x in s)
    m = [mpmath.exp(x) / z for x in s]
    want = [float(m[k] * s[k] / (mpmath.mpf("1e-5") + m[k])) for k in range(2)]
    got = gwp_class_scores(np.array([[[1.0, 3.0]]]), P)
    np.testing.assert_allclose(got, want, rtol=1e-14)


def test_gwp_matches_termwise(rng):
    s = rng.normal(size=(2, 2, 3))
    np.testing.assert_allclose(gwp_class_scores(s, P), gwp_termwise(s, P.epsilon), rtol=1e-6)


# -- classification ---------------------------------------------------------

def test_cls_loss_at_zero_scores():
    # v_c = 0 when every score is zero
    s = np.zeros((3, 3, 4))
    for labels in ([0, 0, 0], [1, 0, 1], [1, 1, 1]):
        loss, _ = classification_loss(s, labels, P)
        assert loss == pytest.approx(math.log(2), abs=1e-12)
    assert round(math.log(2), 4) == 0.6931


def test_cls_loss_decreases_with_confidence():
    losses = []
    for v in (1.0, 5.0, 10.0):
        s = np.zeros((4, 4, 2))
        s[..., 1] = v  # spatially constant, so v_1 is ~v
        losses.append(classification_loss(s, [1], P)[0])
    assert losses[0] > losses[1] > losses[2] > 0
    assert losses[2] < 1e-3


def test_cls_loss_gradient(rng):
    s = rng.normal(size=(4, 4, 3))
    y = np.array([1.0, 0.0])
    _, grad = classification_loss(s, y, P)
    fd = central_diff(lambda x: classification_loss(x, y, P)[0], s.copy())
    assert rel_err(grad, fd) <= 1e-4


def test_cls_permutation_equivariant(rng):
    s = rng.normal(size=(3, 3, 4))
    y = np.array([1, 0, 1])
    perm = [2, 0, 1]
    s_perm = s[..., [0] + [1 + p for p in perm]]
    assert classification_loss(s_perm, y[perm], P)[0] == pytest.approx(classification_loss(s, y, P)[0], rel=1e-12)
    np.testing.assert_allclose(gwp_class_scores(s_perm)[1:], gwp_class_scores(s)[1:][perm], rtol=1e-12)


def test_cls_label_count_checked():
    with pytest.raises(DimensionError):
        classification_loss(np.zeros((2, 2, 3)), [1], P)


def test_labels_from_classes():
    np.testing.assert_array_equal(labels_from_classes([0, 3, 1], 4), [True, False, True, False])
    with pytest.raises(ParameterError):
        labels_from_classes([5], 4)


# -- pixel ------------------------------------------------------------------

def test_pixel_loss_one_hot_is_zero():
    lab = np.array([[0, 1], [2, 1]], np.uint8)
    probs = np.eye(3)[lab]
    loss, grad = pixel_loss(probs, lab, lab != IGNORE, P)
    assert loss == 0.0


def test_pixel_loss_half_probability():
    probs = np.full((3, 3, 2), 0.5)
    lab = np.ones((3, 3), np.uint8)
    assert pixel_loss(probs, lab, np.ones((3, 3), bool), P)[0] == pytest.approx(math.log(2), abs=1e-15)


def test_pixel_loss_empty_valid_set(rng):
    probs = random_probs(rng, 3, 3, 2)
    loss, grad = pixel_loss(probs, np.full((3, 3), IGNORE, np.uint8), None, P)
    assert loss == 0.0 and not grad.any()


def test_pixel_loss_value_and_gradient(rng):
    probs = random_probs(rng, 6, 6, 3)
    lab = rng.integers(0, 3, size=(6, 6)).astype(np.uint8)
    lab[rng.random((6, 6)) < 0.2] = IGNORE
    valid = lab != IGNORE
    loss, grad = pixel_loss(probs, lab, valid, P)
    assert abs(loss - pixel_termwise(probs, lab, valid)) <= 1e-6 * abs(loss)
    fd = central_diff(lambda x: pixel_loss(x, lab, valid, P)[0], probs.copy())
    assert rel_err(grad, fd) <= 1e-4


def test_pixel_loss_class_balanced():
    probs = np.full((1, 4, 2), 0.5)
    probs[0, 0] = [0.9, 0.1]
    lab = np.array([[0, 1, 1, 1]], np.uint8)
    # class 0: -log 0.9 over one pixel; class 1: -log 0.5 over three
    want = (-math.log(0.9) + math.log(2)) / 2
    assert pixel_loss(probs, lab, None, P)[0] == pytest.approx(want, rel=1e-14)


def test_pixel_loss_permutation_invariant(rng):
    probs = random_probs(rng, 1, 12, 3)
    lab = rng.integers(0, 3, size=(1, 12)).astype(np.uint8)
    perm = rng.permutation(12)
    a = pixel_loss(probs, lab, None, P)[0]
    b = pixel_loss(probs[:, perm], lab[:, perm], None, P)[0]
    assert a == pytest.approx(b, rel=1e-14)


# -- region -----------------------------------------------------------------

def test_region_identical_distributions():
    probs = np.full((1, 2, 3), 1 / 3)
    same = np.array([[1, 1]], np.uint8)
    diff = np.array([[1, 2]], np.uint8)
    assert region_loss(probs, same, None, P)[0] == 0.0
    assert region_loss(probs, diff, None, P)[0] == pytest.approx(3.0)


def test_region_straight_boundary_hand_count():
    probs = np.full((4, 4, 2), 0.5)
    lab = np.zeros((4, 4), np.uint8)
    lab[:, 2:] = 1
    # radius 3 covers the whole 4x4 grid: 15 neighbors, 8 across the boundary
    assert region_loss(probs, lab, None, P)[0] == pytest.approx(3.0 * 8 / 15, rel=1e-14)
    # radius 1: edge rows give 0 + 2/5 + 2/5 + 0, middle rows 0 + 3/8 + 3/8 + 0
    expected = 3.0 * (2 * (4 / 5) + 2 * (6 / 8)) / 16
    assert region_loss(probs, lab, None, LossParams(region_radius=1))[0] == pytest.approx(expected, rel=1e-14)


def test_region_matches_termwise(rng):
    probs = random_probs(rng, 6, 6, 3, sharp=2.0)
    lab = rng.integers(0, 3, size=(6, 6)).astype(np.uint8)
    lab[0, 0] = IGNORE
    valid = lab != IGNORE
    for params in (P, LossParams(region_radius=1, margin=0.5)):
        got = region_loss(probs, lab, valid, params)[0]
        want = region_termwise(probs, lab, valid, params.region_radius, params.margin)
        assert got == pytest.approx(want, rel=1e-10)


def hinge_clear(probs, lab, params, gap=1e-3):
    """True when no boundary pair sits within `gap` of the hinge kink."""
    h, w, _ = probs.shape
    r = params.region_radius
    for y in range(h):
        for x in range(w):
            for dy in range(-r, r + 1):
                for dx in range(-r, r + 1):
                    yy, xx = y + dy, x + dx
                    if 0 <= yy < h and 0 <= xx < w and lab[yy, xx] != lab[y, x]:
                        if abs(kl(probs[yy, xx], probs[y, x]) - params.margin) < gap:
                            return False
    return True


def kink_free_fixture(rng, sharp, params):
    """Redraw until no boundary pair is within 1e-3 of the hinge kink."""
    while True:
        probs = random_probs(rng, 6, 6, 3, sharp=sharp)
        lab = rng.integers(0, 3, size=(6, 6)).astype(np.uint8)
        if hinge_clear(probs, lab, params):
            return probs, lab


# unit-scale logits keep probabilities well above the KL floor, where the
# central-difference truncation error (~ step^2 / p^2) stays small
@pytest.mark.parametrize("sharp, margin", [(0.5, 3.0), (1.0, 0.3), (1.0, 0.5)])
def test_region_gradient(rng, sharp, margin):
    params = LossParams(margin=margin)
    probs, lab = kink_free_fixture(rng, sharp, params)
    _, grad = region_loss(probs, lab, None, params)
    fd = central_diff(lambda x: region_loss(x, lab, None, params)[0], probs.copy())
    assert rel_err(grad, fd) <= 1e-4


def test_region_hinge_regimes_exercised(rng):
    params = LossParams(margin=0.5)
    probs, lab = kink_free_fixture(rng, 1.0, params)
    kls = [kl(probs[yy, xx], probs[y, x]) for y in range(6) for x in range(6)
           for yy in range(max(0, y - 3), min(6, y + 4)) for xx in range(max(0, x - 3), min(6, x + 4))
           if lab[yy, xx] != lab[y, x]]
    # both active (KL < margin) and inactive hinge pairs are present
    assert min(kls) < 0.5 < max(kls)
    _, grad = region_loss(probs, lab, None, params)
    fd = central_diff(lambda x: region_loss(x, lab, None, params)[0], probs.copy())
    assert rel_err(grad, fd) <= 1e-4


def test_region_hinge_kink_has_zero_gradient():
    # mirrored distributions: both boundary pairs have the same KL, placed
    # exactly at the margin with the loss's own arithmetic
    p = np.array([0.8, 0.2])
    q = p[::-1].copy()
    d = float(np.sum(q * (np.log(q) - np.log(p))))
    probs = np.stack([p, q])[None]
    lab = np.array([[0, 1]], np.uint8)
    loss, grad = region_loss(probs, lab, None, LossParams(margin=d, region_radius=1))
    assert loss == 0.0 and not grad.any()
    loss, grad = region_loss(probs, lab, None, LossParams(margin=d * 1.01, region_radius=1))
    assert loss > 0 and grad.any()


def test_region_empty_valid_set(rng):
    loss, grad = region_loss(random_probs(rng, 3, 3, 2), np.full((3, 3), IGNORE, np.uint8), None, P)
    assert loss == 0.0 and not grad.any()


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 5.0))
def test_losses_non_negative_and_hinge_bounded(seed, margin):
    rng = np.random.default_rng(seed)
    probs = random_probs(rng, 5, 5, 3, sharp=3.0)
    lab = rng.integers(0, 3, size=(5, 5)).astype(np.uint8)
    params = LossParams(margin=margin)
    assert pixel_loss(probs, lab, None, params)[0] >= 0
    reg = region_loss(probs, lab, None, params)[0]
    assert reg >= 0
    # each pair term is bounded by max(margin, largest same-label KL)
    assert reg <= max(margin, max(kl(probs[a, b], probs[c, d]) for a in range(5) for b in range(5)
                                  for c in range(5) for d in range(5))) + 1e-12


# -- schedule and total -----------------------------------------------------

@pytest.mark.parametrize("step, total, want", [(0, 100, 0.0), (100, 100, 1.0), (25, 100, 0.25)])
def test_lambda_schedule(step, total, want):
    assert lambda_schedule(step, total) == want


@pytest.mark.parametrize("step, total", [(-1, 10), (11, 10), (0, 0)])
def test_lambda_schedule_range(step, total):
    with pytest.raises(ParameterError):
        lambda_schedule(step, total)


def fixture(rng, h=4, w=4, c=3):
    s = rng.normal(size=(h, w, c))
    s[..., 0] = 1.0
    lab = rng.integers(0, c, size=(h, w)).astype(np.uint8)
    lab[rng.random((h, w)) < 0.15] = IGNORE
    y = (rng.random(c - 1) < 0.5).astype(float)
    return s, y, lab, lab != IGNORE


def test_total_at_zero_lambda(rng):
    s, y, lab, valid = fixture(rng)
    rep = total_loss(s, y, lab, valid, 0.0, P)
    assert rep.total == rep.cls + rep.pixel
    assert rep.mask == rep.pixel


def test_total_is_sum_of_components(rng):
    s, y, lab, valid = fixture(rng)
    rep = total_loss(s, y, lab, valid, 0.37, P)
    m = normalize_scores(s)
    assert rep.cls == classification_loss(s, y, P)[0]
    assert rep.pixel == pixel_loss(m, lab, valid, P)[0]
    assert rep.region == region_loss(m, lab, valid, P)[0]
    assert rep.mask == rep.pixel + 0.37 * rep.region
    assert rep.total == rep.cls + rep.mask
    assert set(rep.to_dict()) == {"cls", "pixel", "region", "lambda", "mask", "total"}


def test_total_gradient(rng):
    s, y, lab, valid = fixture(rng)
    params = LossParams(margin=1.0)
    rep = total_loss(s, y, lab, valid, 0.5, params)
    fd = central_diff(lambda x: total_loss(x, y, lab, valid, 0.5, params).total, s.copy())
    assert rel_err(rep.grad_scores, fd) <= 1e-4


def test_float32_inputs_give_float32_gradients(rng):
    s, y, lab, valid = fixture(rng)
    rep = total_loss(s.astype(np.float32), y, lab, valid, 1.0, P)
    assert rep.grad_scores.dtype == np.float32
    assert np.all(np.isfinite(rep.grad_scores))
