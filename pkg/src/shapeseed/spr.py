"""Semantics-augmented pixel refinement.

Score maps are propagated through local affinities that mix a color kernel and
a per-class score kernel::

    k_c(i, j) = -alpha * |x_i - x_j| / sigma_x(i)^2
                - (1 - alpha) * |m_i^c - m_j^c| / sigma_c(i)^2

The neighborhood of pixel i is the union of the 8 neighbors at every dilation
in ``radii`` (center excluded, truncated at the border). One softmax over that
union gives row-stochastic weights, and ``iterations`` synchronous sweeps of
``m_t(i) = sum_j w(j -> i) m_{t-1}(j)`` refine the present-class channels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DimensionError, ParameterError
from .grid import IGNORE, as_grid, present_channels

SUM_TOLERANCE = 1e-3
SIGMA_SUPPORTS = ("local", "global")


@dataclass(frozen=True)
class SprParams:
    alpha: float = 0.8
    radii: tuple[int, ...] = (1, 2, 4, 8, 12, 24)
    iterations: int = 10
    theta_frac: float = 0.6
    floor: float = 0.2
    sigma_floor: float = 1e-4
    recompute: bool = False
    sigma_support: str = "local"

    def __post_init__(self):
        object.__setattr__(self, "radii", tuple(int(r) for r in self.radii))
        if not 0.0 <= self.alpha <= 1.0:
            raise ParameterError("alpha must lie in [0, 1]")
        if self.iterations < 0:
            raise ParameterError("iterations must be >= 0")
        if not self.radii or any(r < 1 for r in self.radii):
            raise ParameterError("radii must be non-empty and each >= 1")
        if any(b <= a for a, b in zip(self.radii, self.radii[1:])):
            raise ParameterError("radii must be strictly increasing")
        if not 0.0 < self.theta_frac <= 1.0:
            raise ParameterError("theta_frac must lie in (0, 1]")
        if not 0.0 <= self.floor < 1.0:
            raise ParameterError("floor must lie in [0, 1)")
        if not self.sigma_floor > 0:
            raise ParameterError("sigma_floor must be > 0")
        if self.sigma_support not in SIGMA_SUPPORTS:
            raise ParameterError(f"sigma_support must be one of {SIGMA_SUPPORTS}")


@dataclass
class AffinityField:
    """Normalized neighbor weights for a set of score channels.

    ``weights[y, x, k, n]`` is the weight with which the pixel at
    ``(y + offsets[n, 0], x + offsets[n, 1])`` flows into ``(y, x)`` for
    channel ``channels[k]``. Out-of-bounds neighbors carry weight 0.
    ``channels`` is None for a class-agnostic field shared by all channels.
    """

    offsets: np.ndarray
    weights: np.ndarray
    channels: np.ndarray | None
    has_neighbors: np.ndarray

    def slice_for(self, channel: int) -> np.ndarray:
        if self.channels is None:
            return self.weights[:, :, 0, :]
        k = np.flatnonzero(self.channels == channel)
        if len(k) == 0:
            raise ParameterError(f"no affinities for channel {channel}")
        return self.weights[:, :, k[0], :]


def dilated_offsets(radii) -> np.ndarray:
    """Offsets of the 8-neighborhood at each dilation, radius-major."""
    ring = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
    return np.array([(dy * r, dx * r) for r in radii for dy, dx in ring], dtype=np.intp)


def _shifted(a: np.ndarray, dy: int, dx: int, fill=0.0) -> np.ndarray:
    """``out[y, x] = a[y + dy, x + dx]`` where in bounds, else `fill`."""
    h, w = a.shape[:2]
    out = np.full_like(a, fill)
    if abs(dy) >= h or abs(dx) >= w:
        return out
    ys, yd = slice(max(0, dy), min(h, h + dy)), slice(max(0, -dy), min(h, h - dy))
    xs, xd = slice(max(0, dx), min(w, w + dx)), slice(max(0, -dx), min(w, w - dx))
    out[yd, xd] = a[ys, xs]
    return out


def _inbounds(h: int, w: int, offsets: np.ndarray) -> np.ndarray:
    ys = np.arange(h)[:, None, None] + offsets[:, 0]
    xs = np.arange(w)[None, :, None] + offsets[:, 1]
    return (ys >= 0) & (ys < h) & (xs >= 0) & (xs < w)


def _local_variance(values: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    v = values.astype(np.float64)
    s1 = v.copy()
    s2 = v * v
    count = np.ones(v.shape[:2] + (1,))
    ones = np.ones(v.shape[:2] + (1,))
    for dy, dx in offsets:
        nb = _shifted(v, dy, dx)
        s1 += nb
        s2 += nb * nb
        count += _shifted(ones, dy, dx)
    mean = s1 / count
    return np.maximum(s2 / count - mean * mean, 0.0)


def _variance(values: np.ndarray, offsets: np.ndarray, support: str) -> np.ndarray:
    if support == "global":
        v = values.astype(np.float64)
        return np.broadcast_to(v.reshape(-1, v.shape[2]).var(axis=0), v.shape).copy()
    return _local_variance(values, offsets)


def local_sigma(values, radii, sigma_floor: float = 1e-4) -> np.ndarray:
    """Per-pixel, per-channel standard deviation over the union neighbor set.

    The set includes the pixel itself. Values are floored at `sigma_floor`.
    """
    v = as_grid(values)
    var = _local_variance(v, dilated_offsets(radii))
    return np.maximum(np.sqrt(var), sigma_floor).astype(v.dtype)


def _color_sigma_sq(image: np.ndarray, offsets: np.ndarray, sigma_floor: float,
                    support: str = "local") -> np.ndarray:
    # scale of the RGB Euclidean distance: root of the summed channel variances
    var = _variance(image, offsets, support).sum(axis=2)
    return np.maximum(np.sqrt(var), sigma_floor) ** 2


def _softmax_rows(logits: np.ndarray, inb: np.ndarray) -> np.ndarray:
    # logits: (H, W, K, N); inb: (H, W, N)
    masked = np.where(inb[:, :, None, :], logits, -np.inf)
    top = masked.max(axis=3, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    e = np.exp(masked - top)
    total = e.sum(axis=3, keepdims=True)
    return np.divide(e, total, out=np.zeros_like(e), where=total > 0)


def check_normalized(scores: np.ndarray, tol: float = SUM_TOLERANCE) -> None:
    sums = scores.sum(axis=2, dtype=np.float64)
    if not np.all(np.abs(sums - 1.0) <= tol):
        worst = float(np.max(np.abs(sums - 1.0)))
        raise ContractError(f"scores are not normalized (max |sum - 1| = {worst:.3g})")


def compute_affinities(image, scores, present, params: SprParams = SprParams(), *,
                       kernel_scores=None, check: bool = True) -> AffinityField:
    """Softmax-normalized joint color/class affinities for the present channels.

    `scores` must be the normalized map M (checked to 1e-3 unless `check` is
    False). The class term reads `kernel_scores` instead when given (e.g. the
    raw map S).
    """
    x = as_grid(image)
    m = as_grid(scores)
    if x.shape[:2] != m.shape[:2]:
        raise DimensionError(f"image {x.shape[:2]} and scores {m.shape[:2]} differ in size")
    if check:
        check_normalized(m)
    ks = m if kernel_scores is None else as_grid(kernel_scores)
    if ks.shape != m.shape:
        raise DimensionError("kernel_scores must match scores in shape")
    channels = present_channels(present, m.shape[2])
    h, w = m.shape[:2]
    offsets = dilated_offsets(params.radii)
    inb = _inbounds(h, w, offsets)
    alpha = float(params.alpha)

    xf = x.astype(np.float64)
    sx2 = _color_sigma_sq(xf, offsets, params.sigma_floor, params.sigma_support)
    sc = ks[..., channels].astype(np.float64)
    ss2 = np.maximum(np.sqrt(_variance(sc, offsets, params.sigma_support)), params.sigma_floor) ** 2

    n = len(offsets)
    logits = np.empty((h, w, len(channels), n))
    for k, (dy, dx) in enumerate(offsets):
        dcol = np.sqrt(np.sum((xf - _shifted(xf, dy, dx)) ** 2, axis=2))
        dsem = np.abs(sc - _shifted(sc, dy, dx))
        color = alpha * dcol / sx2
        logits[:, :, :, k] = -color[:, :, None] - (1.0 - alpha) * dsem / ss2
    weights = _softmax_rows(logits, inb)
    return AffinityField(offsets=offsets, weights=weights, channels=channels,
                         has_neighbors=inb.any(axis=2))


def color_affinities(image, params: SprParams = SprParams()) -> AffinityField:
    """Class-agnostic affinities from the color kernel alone (the alpha = 1 case)."""
    x = as_grid(image).astype(np.float64)
    h, w = x.shape[:2]
    offsets = dilated_offsets(params.radii)
    inb = _inbounds(h, w, offsets)
    sx2 = _color_sigma_sq(x, offsets, params.sigma_floor, params.sigma_support)
    logits = np.empty((h, w, 1, len(offsets)))
    for k, (dy, dx) in enumerate(offsets):
        dcol = np.sqrt(np.sum((x - _shifted(x, dy, dx)) ** 2, axis=2))
        logits[:, :, 0, k] = -(1.0 * dcol / sx2)
    return AffinityField(offsets=offsets, weights=_softmax_rows(logits, inb),
                         channels=None, has_neighbors=inb.any(axis=2))


def _propagate(plane: np.ndarray, weights: np.ndarray, offsets: np.ndarray,
               has_neighbors: np.ndarray) -> np.ndarray:
    acc = np.zeros_like(plane)
    for k, (dy, dx) in enumerate(offsets):
        acc += weights[:, :, k] * _shifted(plane, dy, dx)
    return np.where(has_neighbors, acc, plane)


def refine(scores, affinities: AffinityField, present, iterations: int) -> np.ndarray:
    """Run `iterations` synchronous propagation sweeps on the present channels.

    Absent channels are returned untouched. Arithmetic is float64; the result
    has the precision of `scores`.
    """
    if iterations < 0:
        raise ParameterError("iterations must be >= 0")
    m = as_grid(scores)
    out = m.copy()
    if iterations == 0:
        return out
    if affinities.weights.shape[:2] != m.shape[:2]:
        raise DimensionError("affinity field and scores differ in size")
    for c in present_channels(present, m.shape[2]):
        wts = affinities.slice_for(c)
        plane = m[..., c].astype(np.float64)
        for _ in range(iterations):
            plane = _propagate(plane, wts, affinities.offsets, affinities.has_neighbors)
        out[..., c] = plane
    return out


def spr(image, scores, present, params: SprParams = SprParams(), *, kernel_scores=None) -> np.ndarray:
    """Affinities from the initial map, then ``params.iterations`` refinement sweeps.

    With ``params.recompute`` the affinities are rebuilt from the current map
    before every sweep instead.
    """
    if not params.recompute:
        aff = compute_affinities(image, scores, present, params, kernel_scores=kernel_scores)
        return refine(scores, aff, present, params.iterations)
    m = as_grid(scores)
    check_normalized(m)
    for _ in range(params.iterations):
        # per-class weights let channel sums drift after the first sweep
        aff = compute_affinities(image, m, present, params, check=False)
        m = refine(m, aff, present, 1)
    return m.copy()


def pseudo_mask(refined, present, params: SprParams = SprParams()) -> tuple[np.ndarray, np.ndarray]:
    """Threshold the refined map into pseudo labels and a validity mask.

    A pixel takes its argmax class c when c is present, ``m_c >= theta_frac *
    max(m_c)`` over the image, and ``m_c >= floor``; otherwise it is IGNORE.
    """
    m = as_grid(refined)
    if not len(list(present)):
        raise ParameterError("pseudo_mask needs at least one present class")
    channels = present_channels(present, m.shape[2])
    mf = m.astype(np.float64)
    label = np.argmax(mf, axis=2)
    best = np.take_along_axis(mf, label[..., None], axis=2)[..., 0]
    thresholds = np.full(m.shape[2], np.inf)
    thresholds[channels] = params.theta_frac * mf[..., channels].max(axis=(0, 1))
    ok = (best >= thresholds[label]) & (best >= params.floor)
    pseudo = np.where(ok, label, IGNORE).astype(np.uint8)
    return pseudo, pseudo != IGNORE
