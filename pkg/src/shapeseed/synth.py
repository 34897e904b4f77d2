"""Deterministic synthetic scenes and degraded score seeds for desk experiments."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import ParameterError
from .grid import BACKGROUND, IGNORE

SCENE_KINDS = ("shapes", "two-tone-object", "edge-noise")
TRUNK_SPREAD = 0.06


@dataclass
class SyntheticScene:
    image: np.ndarray  # (H, W, 3) float32 in [0, 1]
    gt: np.ndarray  # (H, W) uint8
    present: tuple[int, ...]  # object classes in gt, background implied
    n_classes: int  # K + 1
    parts: np.ndarray | None = None  # (H, W) int part ids, 0 = none


def _disk(h, w, cy, cx, r):
    yy, xx = np.mgrid[:h, :w]
    return (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r


def _rect(h, w, y0, x0, y1, x1):
    m = np.zeros((h, w), bool)
    m[max(0, y0):min(h, y1), max(0, x0):min(w, x1)] = True
    return m


def _random_shape(rng, h, w):
    r = rng.uniform(0.12, 0.22) * min(h, w)
    cy = rng.uniform(r, h - r)
    cx = rng.uniform(r, w - r)
    if rng.random() < 0.5:
        return _disk(h, w, cy, cx, r)
    hh, hw = r * rng.uniform(0.7, 1.2), r * rng.uniform(0.7, 1.2)
    return _rect(h, w, int(cy - hh), int(cx - hw), int(cy + hh), int(cx + hw))


def _texture(rng, h, w, base, amp):
    """A base color modulated by a random-orientation stripe pattern."""
    yy, xx = np.mgrid[:h, :w]
    theta = rng.uniform(0, np.pi)
    period = rng.uniform(3.0, 6.0)
    phase = np.cos(2 * np.pi * (yy * np.sin(theta) + xx * np.cos(theta)) / period)
    return np.asarray(base)[None, None, :] + amp * phase[..., None]


def _shapes(rng, h, w, n_classes, speckle):
    n_obj = int(rng.integers(1, 4))
    classes = rng.choice(np.arange(1, n_classes), size=min(n_obj, n_classes - 1), replace=False)
    gt = np.zeros((h, w), np.uint8)
    if speckle:
        image = np.broadcast_to(rng.uniform(0.1, 0.9, 3), (h, w, 3)).copy()
    else:
        image = _texture(rng, h, w, rng.uniform(0.2, 0.8, 3), 0.15)
    for c in classes:
        m = _random_shape(rng, h, w)
        gt[m] = c
        color = rng.uniform(0.0, 1.0, 3)
        image[m] = color if speckle else _texture(rng, h, w, color, 0.1)[m]
    if speckle:
        spots = rng.random((h, w)) < 0.05
        image[spots] = rng.random((int(spots.sum()), 3))
    return image, gt


def _two_tone(rng, h, w, n_classes):
    """One object made of two distinctly colored parts sharing one label.

    A round "crown" sits on a "trunk" of similar area whose color is close to
    the background, so a color-only kernel tends to leak background scores
    into the trunk.
    """
    c = int(rng.integers(1, n_classes))
    gt = np.zeros((h, w), np.uint8)
    bg = rng.uniform(0.3, 0.7, 3)
    crown_color = np.clip(bg + rng.choice([-1, 1], 3) * rng.uniform(0.25, 0.3, 3), 0, 1)
    trunk_color = np.clip(bg + rng.normal(0, TRUNK_SPREAD, 3), 0, 1)
    r = rng.uniform(0.16, 0.2) * min(h, w)
    cy = rng.uniform(0.25, 0.3) * h
    cx = rng.uniform(0.4, 0.6) * w
    crown = _disk(h, w, cy, cx, r)
    half = rng.uniform(0.45, 0.6) * r
    bottom = min(h - 2, int(cy + r + rng.uniform(1.2, 1.5) * r))
    trunk = _rect(h, w, int(cy), int(cx - half), bottom, int(cx + half)) & ~crown
    gt[crown | trunk] = c
    image = np.broadcast_to(bg, (h, w, 3)).copy()
    image[crown] = crown_color
    image[trunk] = trunk_color
    image += rng.normal(0, 0.02, (h, w, 3))
    parts = np.zeros((h, w), np.int8)
    parts[crown] = 1
    parts[trunk] = 2
    return image, gt, parts


def synth(kind: str, h: int, w: int, seed: int, n_classes: int = 5) -> SyntheticScene:
    """Build one deterministic scene of the given kind."""
    if kind not in SCENE_KINDS:
        raise ParameterError(f"unknown scene kind {kind!r}; expected one of {SCENE_KINDS}")
    if h < 16 or w < 16:
        raise ParameterError("synthetic scenes need h, w >= 16")
    if n_classes < 2:
        raise ParameterError("n_classes must be >= 2")
    rng = np.random.default_rng([int(seed), SCENE_KINDS.index(kind), h, w])
    parts = None
    if kind == "two-tone-object":
        image, gt, parts = _two_tone(rng, h, w, n_classes)
    else:
        image, gt = _shapes(rng, h, w, n_classes, speckle=(kind == "edge-noise"))
    image = np.clip(image, 0.0, 1.0).astype(np.float32)
    present = tuple(int(c) for c in np.unique(gt) if c != BACKGROUND and c != IGNORE)
    return SyntheticScene(image=image, gt=gt, present=present, n_classes=n_classes, parts=parts)


def one_hot(gt: np.ndarray, n_classes: int) -> np.ndarray:
    out = np.zeros(gt.shape + (n_classes,), np.float64)
    keep = gt != IGNORE
    out[keep, gt[keep]] = 1.0
    return out


def degraded_scores(gt: np.ndarray, n_classes: int, seed: int, blur: float = 3.0,
                    noise: float = 0.15, sharpness: float = 6.0, present=None,
                    weak=None, weak_gain: float = 1.0) -> np.ndarray:
    """Raw score map S made by blurring and noising the one-hot ground truth.

    Channels outside `present` (background always kept) are pushed down so the
    seed behaves like a classifier that got the image tags right.
    ``blur=0, noise=0`` gives a clean, confident seed.
    """
    rng = np.random.default_rng([int(seed), 7919])
    oh = one_hot(gt, n_classes)
    if weak is not None:
        # a classifier that fires on part of the object only
        fg = np.asarray(weak, bool) & (gt != BACKGROUND) & (gt != IGNORE)
        oh[fg] *= weak_gain
        oh[fg, BACKGROUND] = 1.0 - weak_gain
    if blur > 0:
        oh = gaussian_filter(oh, sigma=(blur, blur, 0), mode="nearest")
    if noise > 0:
        oh = oh + noise * gaussian_filter(rng.normal(size=oh.shape), sigma=(1.0, 1.0, 0)) * 3.0
    s = sharpness * oh
    if present is not None:
        absent = np.ones(n_classes, bool)
        absent[BACKGROUND] = False
        absent[list(present)] = False
        s[..., absent] -= sharpness
    return s.astype(np.float32)
