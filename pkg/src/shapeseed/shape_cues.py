"""Texture-dropping masks driven by patch self-information.

Self-information of the patch around each pixel is estimated with a Gaussian
kernel density over a few patches sampled from its Manhattan neighborhood.
Low-information (repetitive, texture-like) pixels get high drop probability
through a Boltzmann weighting ``exp(-I / tau)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import DimensionError, ParameterError
from .grid import as_grid
from .rng import counter_uniform


@dataclass(frozen=True)
class ScmParams:
    patch_side: int = 3
    neighbor_radius: int = 7
    n_samples: int = 9
    bandwidth: float = 1.0
    temperature: float = 0.5
    target_rate: float = 0.25
    seed: int = 0
    replacement: bool = False

    def __post_init__(self):
        if self.patch_side < 1 or self.patch_side % 2 == 0:
            raise ParameterError("patch_side must be odd and >= 1")
        if self.neighbor_radius < 1:
            raise ParameterError("neighbor_radius must be >= 1")
        if self.n_samples < 1:
            raise ParameterError("n_samples must be >= 1")
        if not self.bandwidth > 0:
            raise ParameterError("bandwidth must be > 0")
        if not self.temperature > 0:
            raise ParameterError("temperature must be > 0")
        if not 0.0 <= self.target_rate <= 1.0:
            raise ParameterError("target_rate must lie in [0, 1]")


def manhattan_offsets(radius: int) -> np.ndarray:
    """All (dy, dx) with 1 <= |dy| + |dx| <= radius, in raster order."""
    r = np.arange(-radius, radius + 1)
    dy, dx = np.meshgrid(r, r, indexing="ij")
    dist = np.abs(dy) + np.abs(dx)
    keep = (dist >= 1) & (dist <= radius)
    return np.stack([dy[keep], dx[keep]], axis=1)


def sample_neighbors(height: int, width: int, params: ScmParams) -> tuple[np.ndarray, np.ndarray]:
    """Pick sampled neighbor offsets for every pixel.

    Each candidate offset gets a uniform key from the counter RNG keyed by
    (seed, pixel index, offset index); the ``n_samples`` smallest in-bounds
    keys are taken, which is uniform sampling without replacement. Pixels with
    fewer in-bounds candidates use all of them. With ``params.replacement``
    each of the ``n_samples`` draws instead picks one in-bounds candidate
    uniformly (draw indices M..M+n-1), so repeats are possible.

    Returns ``(offsets, chosen)`` where ``offsets`` is the (M, 2) candidate
    table and ``chosen`` is an (H, W, n) array of indices into it, ascending,
    with -1 padding for missing samples.
    """
    offsets = manhattan_offsets(params.neighbor_radius)
    m = len(offsets)
    n = min(params.n_samples, m)
    pix = np.arange(height * width, dtype=np.uint64).reshape(height, width, 1)
    keys = counter_uniform(params.seed, pix, np.arange(m, dtype=np.uint64)[None, None, :])
    rows = np.arange(height)[:, None, None] + offsets[:, 0]
    cols = np.arange(width)[None, :, None] + offsets[:, 1]
    inb = (rows >= 0) & (rows < height) & (cols >= 0) & (cols < width)
    if params.replacement:
        return offsets, _draw_with_replacement(pix, inb, params)
    keys = np.where(inb, keys, np.inf)
    if n < m:
        part = np.argpartition(keys, n - 1, axis=2)[..., :n]
    else:
        part = np.broadcast_to(np.arange(m), keys.shape).copy()
    picked_keys = np.take_along_axis(keys, part, axis=2)
    chosen = np.where(np.isfinite(picked_keys), part, m)
    chosen = np.sort(chosen, axis=2)
    chosen[chosen == m] = -1
    return offsets, chosen


def _draw_with_replacement(pix: np.ndarray, inb: np.ndarray, params: ScmParams) -> np.ndarray:
    m = inb.shape[2]
    draws = np.arange(m, m + params.n_samples, dtype=np.uint64)[None, None, :]
    u = counter_uniform(params.seed, pix, draws)
    count = inb.sum(axis=2, keepdims=True)
    rank = np.minimum(np.floor(u * count), count - 1).astype(np.intp)  # (H, W, n)
    cum = np.cumsum(inb, axis=2)  # (H, W, M)
    # index of the (rank + 1)-th in-bounds candidate
    chosen = np.argmax(cum[:, :, None, :] > rank[..., None], axis=3)
    return np.sort(np.where(count > 0, chosen, -1), axis=2)


def extract_patches(grid: np.ndarray, patch_side: int) -> np.ndarray:
    """(H, W, patch_side**2 * C) patch vectors with edge replication at borders."""
    half = patch_side // 2
    padded = np.pad(grid, ((half, half), (half, half), (0, 0)), mode="edge")
    h, w, c = grid.shape
    views = [padded[dy:dy + h, dx:dx + w, :] for dy in range(patch_side) for dx in range(patch_side)]
    return np.concatenate(views, axis=2)


def self_information(grid, params: ScmParams = ScmParams()) -> np.ndarray:
    """Per-pixel self-information (nats) of the surrounding patch.

    ``I(p) = -log[(1/n) * sum_j exp(-|p - p_j|^2 / 2h^2) / (sqrt(2 pi) h)]``
    over the sampled neighbor patches ``p_j``. Returns an (H, W) map with the
    precision of `grid`.
    """
    g = as_grid(grid)
    h, w, _ = g.shape
    if h < params.patch_side or w < params.patch_side:
        raise DimensionError(f"grid {h}x{w} is smaller than one {params.patch_side}x{params.patch_side} patch")
    patches = extract_patches(g.astype(np.float64), params.patch_side)
    offsets, chosen = sample_neighbors(h, w, params)
    bw = float(params.bandwidth)
    log_norm = np.log(np.sqrt(2.0 * np.pi) * bw)

    valid = chosen >= 0
    safe = np.where(valid, chosen, 0)
    nr = np.clip(np.arange(h)[:, None, None] + offsets[safe, 0], 0, h - 1)
    nc = np.clip(np.arange(w)[None, :, None] + offsets[safe, 1], 0, w - 1)
    neigh = patches[nr, nc]  # (H, W, n, D)
    d2 = np.sum((neigh - patches[:, :, None, :]) ** 2, axis=3)
    logk = np.where(valid, -d2 / (2.0 * bw * bw), -np.inf)
    count = valid.sum(axis=2)
    if np.any(count == 0):
        raise DimensionError("grid too small to sample any neighbor patch")
    info = -(logsumexp(logk, axis=2) - np.log(count)) + log_norm
    return info.astype(g.dtype)


def drop_probability(info, params: ScmParams = ScmParams()) -> np.ndarray:
    """Boltzmann drop probabilities scaled to mean ``target_rate``, clamped to [0, 1]."""
    i = np.asarray(info)
    dtype = i.dtype if i.dtype in (np.float32, np.float64) else np.float32
    i = i.astype(np.float64)
    if not np.all(np.isfinite(i)):
        raise ParameterError("info map contains NaN or Inf")
    # shifting by the minimum leaves w / mean(w) unchanged and avoids underflow
    w = np.exp(-(i - i.min()) / params.temperature)
    r = params.target_rate * w / w.mean()
    return np.clip(r, 0.0, 1.0).astype(dtype)


def sample_drop_mask(probs, seed: int) -> np.ndarray:
    """Boolean mask, True where dropped; each pixel has its own RNG stream."""
    p = np.asarray(probs, dtype=np.float64)
    u = counter_uniform(seed, np.arange(p.size, dtype=np.uint64).reshape(p.shape))
    return u < p


def apply_drop(grid, mask) -> np.ndarray:
    """Zero every channel at dropped pixels. No rescaling of the survivors."""
    g = as_grid(grid)
    m = np.asarray(mask, dtype=bool)
    if m.shape != g.shape[:2]:
        raise DimensionError(f"mask shape {m.shape} does not match grid {g.shape[:2]}")
    out = g.copy()
    out[m] = 0
    return out


def concat_channels(a, b) -> np.ndarray:
    a = as_grid(a)
    b = np.asarray(b)
    if b.ndim != 3 or b.shape[:2] != a.shape[:2]:
        raise DimensionError(f"cannot concatenate {a.shape} with {b.shape}")
    return np.concatenate([a, b.astype(a.dtype, copy=False)], axis=2)
