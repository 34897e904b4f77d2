import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from shapeseed.errors import DimensionError
from shapeseed.grid import (append_background_plane, argmax_mask, normalize_scores,
                            softmax_backward, strip_background_plane)

finite = st.floats(-30, 30, allow_nan=False, width=32)
grids = st.tuples(st.integers(1, 5), st.integers(1, 5), st.integers(1, 6)).flatmap(
    lambda shape: arrays(np.float32, shape, elements=finite))


def test_background_plane_single_pixel():
    out = append_background_plane(np.array([[[2.0]]], np.float32))
    assert out.shape == (1, 1, 2)
    assert out[0, 0, 0] == 1.0 and out[0, 0, 1] == 2.0


def test_background_plane_random(rng):
    s = rng.normal(size=(2, 2, 3)).astype(np.float32)
    out = append_background_plane(s)
    assert out.shape == (2, 2, 4)
    assert np.all(out[..., 0] == 1.0)
    assert out[..., 1:].tobytes() == s.tobytes()


def test_background_plane_round_trip(rng):
    s = rng.normal(size=(3, 4, 2)).astype(np.float32)
    first = append_background_plane(s)
    again = append_background_plane(strip_background_plane(first))
    assert again.tobytes() == first.tobytes()


def test_background_plane_rejects_empty():
    with pytest.raises(DimensionError):
        append_background_plane(np.zeros((2, 2, 0), np.float32))


@pytest.mark.parametrize("scores, expected", [
    ([0.0, 0.0], [0.5, 0.5]),
    ([1.0, 1.0, 1.0, 1.0], [0.25, 0.25, 0.25, 0.25]),
])
def test_normalize_symmetric(scores, expected):
    out = normalize_scores(np.array([[scores]], np.float32))
    np.testing.assert_array_equal(out[0, 0], np.array(expected, np.float32))


def test_normalize_two_to_zero():
    mpmath.mp.dps = 40
    e2 = mpmath.e ** 2
    expected = [float(e2 / (e2 + 1)), float(1 / (e2 + 1))]
    out = normalize_scores(np.array([[[2.0, 0.0]]]))
    np.testing.assert_allclose(out[0, 0], expected, rtol=0, atol=1e-15)
    np.testing.assert_array_equal(np.round(out[0, 0], 4), [0.8808, 0.1192])


def test_normalize_stable_for_large_scores():
    out = normalize_scores(np.array([[[1000.0, 999.0]]], np.float32))
    assert np.all(np.isfinite(out))
    assert abs(out.sum() - 1.0) < 1e-6


@settings(max_examples=60, deadline=None)
@given(grids)
def test_normalize_is_a_distribution(s):
    m = normalize_scores(s)
    assert np.all(m >= 0)
    np.testing.assert_allclose(m.sum(axis=2), 1.0, atol=1e-6)


@settings(max_examples=60, deadline=None)
@given(grids)
def test_argmax_invariant_under_softmax(s):
    # ties in the softmax output can appear where float32 scores differ by
    # less than an ulp of the normalized value; skip those pixels
    m = normalize_scores(s.astype(np.float64))
    srt = np.sort(m, axis=2)
    clear = srt[..., -1] > srt[..., -2] if s.shape[2] > 1 else np.ones(s.shape[:2], bool)
    np.testing.assert_array_equal(argmax_mask(m)[clear], argmax_mask(s)[clear])


def test_argmax_simple_and_tie():
    assert argmax_mask(np.array([[[0.1, 0.9]]]))[0, 0] == 1
    assert argmax_mask(np.array([[[0.5, 0.5]]]))[0, 0] == 0


def test_argmax_matches_linear_scan(rng):
    s = rng.integers(0, 3, size=(8, 8, 4)).astype(np.float32)  # many ties
    expected = np.zeros((8, 8), np.uint8)
    for y in range(8):
        for x in range(8):
            best = 0
            for c in range(1, 4):
                if s[y, x, c] > s[y, x, best]:
                    best = c
            expected[y, x] = best
    np.testing.assert_array_equal(argmax_mask(s), expected)


def test_softmax_backward_matches_jacobian(rng):
    s = rng.normal(size=(1, 1, 4))
    m = normalize_scores(s)[0, 0]
    g = rng.normal(size=4)
    jac = np.diag(m) - np.outer(m, m)
    np.testing.assert_allclose(softmax_backward(m, g), jac.T @ g, atol=1e-15)
