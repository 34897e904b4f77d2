"""Weak-supervision losses with analytic gradients.

Score maps ``S`` have shape (H, W, K + 1), background at channel 0. Losses on
probabilities take ``M = softmax(S)`` and return the gradient w.r.t. ``M``;
:func:`total_loss` maps those back through the softmax so that its gradient is
w.r.t. ``S``. All arithmetic is float64; gradients come back in the precision
of the input map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParameterError
from .grid import IGNORE, as_grid, softmax_backward, softmax_channels


@dataclass(frozen=True)
class LossParams:
    epsilon: float = 1e-5
    region_radius: int = 3
    margin: float = 3.0
    kl_floor: float = 1e-8

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ParameterError("epsilon must be > 0")
        if not self.margin > 0:
            raise ParameterError("margin must be > 0")
        if self.region_radius < 1:
            raise ParameterError("region_radius must be >= 1")
        if not self.kl_floor > 0:
            raise ParameterError("kl_floor must be > 0")


@dataclass
class LossReport:
    cls: float
    pixel: float
    region: float
    lam: float
    mask: float
    total: float
    grad_scores: np.ndarray

    def to_dict(self) -> dict:
        return {"cls": self.cls, "pixel": self.pixel, "region": self.region,
                "lambda": self.lam, "mask": self.mask, "total": self.total}


def _labels_vector(labels, n_objects: int) -> np.ndarray:
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if y.shape != (n_objects,):
        raise DimensionError(f"expected {n_objects} image labels, got {y.shape[0]}")
    return y


def labels_from_classes(present, n_objects: int) -> np.ndarray:
    """Boolean image-label vector over object classes 1..K from class indices."""
    y = np.zeros(n_objects, dtype=bool)
    for c in present:
        c = int(c)
        if c == 0:
            continue
        if not 1 <= c <= n_objects:
            raise ParameterError(f"class {c} out of range 1..{n_objects}")
        y[c - 1] = True
    return y


def _pool(s: np.ndarray, m: np.ndarray, eps: float):
    num = np.einsum("hwc,hwc->c", m, s)
    den = eps + m.sum(axis=(0, 1))
    return num / den, den


def gwp_class_scores(scores, params: LossParams = LossParams()) -> np.ndarray:
    """Normalized global weighted pooling: ``v_c = sum m_c s_c / (eps + sum m_c)``."""
    s = as_grid(scores).astype(np.float64)
    v, _ = _pool(s, softmax_channels(s), params.epsilon)
    return v


def classification_loss(scores, labels, params: LossParams = LossParams()) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy of ``sigmoid(v_c)`` over object classes 1..K.

    `labels` is a length-K vector of image-level tags. Returns the loss and its
    gradient w.r.t. the raw score map (background channel included).
    """
    s0 = as_grid(scores)
    s = s0.astype(np.float64)
    k = s.shape[2] - 1
    if k < 1:
        raise DimensionError("score map needs a background and at least one object channel")
    y = _labels_vector(labels, k)
    m = softmax_channels(s)
    v, den = _pool(s, m, params.epsilon)
    vo = v[1:]
    # log(sigmoid(v)) = -softplus(-v), log(1 - sigmoid(v)) = -softplus(v)
    loss = float(np.sum(y * np.logaddexp(0.0, -vo) + (1.0 - y) * np.logaddexp(0.0, vo)) / k)

    dv = np.zeros_like(v)
    sig = np.exp(-np.logaddexp(0.0, -vo))
    dv[1:] = (sig - y) / k
    grad_m = dv * (s - v) / den
    grad = dv * m / den + softmax_backward(m, grad_m)
    return loss, grad.astype(s0.dtype)


def _prepare_mask(probs, pseudo, valid):
    p0 = as_grid(probs)
    lab = np.asarray(pseudo)
    if lab.shape != p0.shape[:2]:
        raise DimensionError(f"pseudo mask {lab.shape} does not match probs {p0.shape[:2]}")
    val = np.asarray(valid, dtype=bool) if valid is not None else np.ones(lab.shape, bool)
    if val.shape != lab.shape:
        raise DimensionError("valid mask does not match pseudo mask")
    val = val & (lab != IGNORE)
    if np.any(lab[val] >= p0.shape[2]):
        raise ParameterError("pseudo label exceeds the number of channels")
    return p0, lab.astype(np.intp), val


def pixel_loss(probs, pseudo, valid=None, params: LossParams = LossParams()) -> tuple[float, np.ndarray]:
    """Class-balanced cross-entropy against the pseudo labels on valid pixels.

    Each class seen in the valid pseudo labels contributes the mean of
    ``-log m_c`` over its pixels; the loss is the mean over those classes.
    Probabilities are floored at ``params.kl_floor`` inside the log.
    """
    p0, lab, val = _prepare_mask(probs, pseudo, valid)
    p = p0.astype(np.float64)
    grad = np.zeros_like(p)
    classes = np.unique(lab[val])
    if len(classes) == 0:
        return 0.0, grad.astype(p0.dtype)
    ys, xs = np.nonzero(val)
    cs = lab[ys, xs]
    picked = p[ys, xs, cs]
    floored = np.maximum(picked, params.kl_floor)
    counts = np.bincount(cs, minlength=p.shape[2])
    per_class = np.bincount(cs, weights=-np.log(floored), minlength=p.shape[2])
    loss = float(np.mean(per_class[classes] / counts[classes]))
    scale = 1.0 / (len(classes) * counts[cs])
    grad[ys, xs, cs] = np.where(picked > params.kl_floor, -scale / floored, 0.0)
    return loss, grad.astype(p0.dtype)


def _window_offsets(radius: int) -> list[tuple[int, int]]:
    r = range(-radius, radius + 1)
    return [(dy, dx) for dy in r for dx in r if (dy, dx) != (0, 0)]


def _offsets_within(radius: int, h: int, w: int) -> list[tuple[int, int]]:
    return [(dy, dx) for dy, dx in _window_offsets(radius) if abs(dy) < h and abs(dx) < w]


def _pair_slices(h: int, w: int, dy: int, dx: int):
    """Slices (center, neighbor) such that neighbor = center + (dy, dx), both in bounds."""
    c = (slice(max(0, -dy), h - max(0, dy)), slice(max(0, -dx), w - max(0, dx)))
    n = (slice(max(0, dy), h + min(0, dy)), slice(max(0, dx), w + min(0, dx)))
    return c, n


def region_loss(probs, pseudo, valid=None, params: LossParams = LossParams()) -> tuple[float, np.ndarray]:
    """KL attraction to same-label neighbors, hinged KL repulsion from others.

    For every valid center i, its window neighbors j (radius
    ``params.region_radius``, center excluded, in bounds, valid) split by
    pseudo-label agreement. Same label: ``KL(m_j || m_i)``. Different label:
    ``max(0, margin - KL(m_j || m_i))``. Each center averages over its
    neighbors; the loss averages over all valid centers.
    """
    p0, lab, val = _prepare_mask(probs, pseudo, valid)
    p = p0.astype(np.float64)
    h, w, _ = p.shape
    grad = np.zeros_like(p)
    n_valid = int(val.sum())
    if n_valid == 0:
        return 0.0, grad.astype(p0.dtype)

    live = p > params.kl_floor
    q = np.maximum(p, params.kl_floor)
    logq = np.log(q)
    offsets = _offsets_within(params.region_radius, h, w)

    n_nb = np.zeros((h, w))
    for dy, dx in offsets:
        ci, ni = _pair_slices(h, w, dy, dx)
        n_nb[ci] += val[ci] & val[ni]
    center_w = np.divide(1.0, n_nb, out=np.zeros_like(n_nb), where=n_nb > 0) / n_valid

    total = 0.0
    for dy, dx in offsets:
        ci, ni = _pair_slices(h, w, dy, dx)
        pair = val[ci] & val[ni]
        if not pair.any():
            continue
        qj, qi = q[ni], q[ci]
        kl = np.sum(qj * (logq[ni] - logq[ci]), axis=2)
        same = lab[ci] == lab[ni]
        active = ~same & (kl < params.margin)
        ell = np.where(same, kl, np.where(active, params.margin - kl, 0.0))
        wgt = np.where(pair, center_w[ci], 0.0)
        total += float(np.sum(wgt * ell))
        # d ell / d KL: +1 same, -1 active hinge, 0 otherwise
        sign = np.where(same, 1.0, np.where(active, -1.0, 0.0)) * wgt
        g_j = (logq[ni] - logq[ci] + 1.0) * sign[..., None]
        g_i = -(qj / qi) * sign[..., None]
        grad[ni] += np.where(live[ni], g_j, 0.0)
        grad[ci] += np.where(live[ci], g_i, 0.0)
    return total, grad.astype(p0.dtype)


def lambda_schedule(step: int, total_steps: int) -> float:
    """Linear ramp of the region-loss weight from 0 to 1."""
    if total_steps < 1:
        raise ParameterError("total_steps must be >= 1")
    if not 0 <= step <= total_steps:
        raise ParameterError(f"step {step} outside [0, {total_steps}]")
    return step / total_steps


def total_loss(scores, labels, pseudo, valid, lam: float,
               params: LossParams = LossParams()) -> LossReport:
    """Classification + pixel + lam * region, with the gradient w.r.t. the raw scores."""
    s0 = as_grid(scores)
    s = s0.astype(np.float64)
    m = softmax_channels(s)
    cls, g_cls = classification_loss(s, labels, params)
    pix, g_pix = pixel_loss(m, pseudo, valid, params)
    reg, g_reg = region_loss(m, pseudo, valid, params)
    mask = pix + lam * reg
    grad = g_cls + softmax_backward(m, g_pix + lam * g_reg)
    return LossReport(cls=cls, pixel=pix, region=reg, lam=float(lam), mask=mask,
                      total=cls + mask, grad_scores=grad.astype(s0.dtype))
