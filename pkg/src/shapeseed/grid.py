"""Dense H x W x C grids and score-map plumbing.

Every grid in the toolkit is a plain ``numpy`` array of shape ``(H, W, C)``.
Score maps carry ``K + 1`` channels with the background at channel 0 and the
object classes at 1..K. Label masks are ``uint8`` arrays of shape ``(H, W)``
with :data:`IGNORE` marking pixels that carry no label.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, ParameterError

IGNORE = 255
BACKGROUND = 0


def as_grid(x, dtype=None) -> np.ndarray:
    """Return `x` as a float array of shape (H, W, C).

    float32 and float64 inputs keep their precision; anything else becomes
    float32.
    """
    a = np.asarray(x)
    if dtype is None:
        dtype = a.dtype if a.dtype in (np.float32, np.float64) else np.float32
    a = a.astype(dtype, copy=False)
    if a.ndim == 2:
        a = a[:, :, None]
    if a.ndim != 3:
        raise DimensionError(f"expected an (H, W, C) grid, got shape {a.shape}")
    return a


def _check_finite(a: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(a)):
        raise ParameterError(f"{what} contains NaN or Inf")


def append_background_plane(scores) -> np.ndarray:
    """Prepend a constant-one background channel to a K-channel score map."""
    s = as_grid(scores)
    if s.shape[2] < 1:
        raise DimensionError("need at least one object class channel")
    out = np.empty(s.shape[:2] + (s.shape[2] + 1,), dtype=s.dtype)
    out[..., 0] = 1.0
    out[..., 1:] = s
    return out


def strip_background_plane(scores) -> np.ndarray:
    """Inverse of :func:`append_background_plane`."""
    s = as_grid(scores)
    if s.shape[2] < 2:
        raise DimensionError("score map has no object class channels")
    return s[..., 1:].copy()


def softmax_channels(scores: np.ndarray) -> np.ndarray:
    """Per-pixel softmax along the last axis, with max-subtraction."""
    z = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def normalize_scores(scores) -> np.ndarray:
    """Per-pixel softmax over channels (the normalized score map M).

    The result has the precision of the input; the arithmetic is float64.
    """
    s = as_grid(scores)
    if s.shape[2] < 1:
        raise DimensionError("need at least one channel")
    return softmax_channels(s.astype(np.float64)).astype(s.dtype)


def softmax_backward(probs: np.ndarray, grad_probs: np.ndarray) -> np.ndarray:
    """Map a gradient w.r.t. softmax outputs back to the logits."""
    inner = np.sum(grad_probs * probs, axis=-1, keepdims=True)
    return probs * (grad_probs - inner)


def argmax_mask(scores) -> np.ndarray:
    """Channel index of the per-pixel maximum; ties go to the lowest index."""
    s = as_grid(scores)
    if s.shape[2] < 1:
        raise DimensionError("need at least one channel")
    if s.shape[2] > IGNORE:
        raise DimensionError(f"at most {IGNORE} classes fit in a uint8 mask")
    # np.argmax returns the first occurrence of the maximum
    return np.argmax(s, axis=2).astype(np.uint8)


def present_channels(present, n_channels: int) -> np.ndarray:
    """Sorted channel indices for a class set, background always included."""
    idx = {BACKGROUND}
    for c in present:
        c = int(c)
        if not 0 <= c < n_channels:
            raise ParameterError(f"class {c} out of range for {n_channels} channels")
        idx.add(c)
    return np.array(sorted(idx), dtype=np.intp)


def check_label_mask(labels, n_classes: int | None = None) -> np.ndarray:
    m = np.asarray(labels)
    if m.ndim != 2:
        raise DimensionError(f"label mask must be 2-D, got shape {m.shape}")
    m = m.astype(np.uint8)
    if n_classes is not None:
        bad = (m != IGNORE) & (m >= n_classes)
        if bad.any():
            raise ParameterError(f"label {int(m[bad].max())} >= {n_classes} classes")
    return m
