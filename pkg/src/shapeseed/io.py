"""File formats: dense tensor files (.dtf), label-mask PNGs and RGB PNGs.

A ``.dtf`` file is a 16-byte header followed by raw little-endian float32
data in row-major ``(row * W + col) * C + channel`` order::

    b"SEGT" | version 0x01 | dtype 0x01 | 0x00 0x00 | H:u32 | W:u32 | C:u32
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import FormatError
from .grid import as_grid, check_label_mask

MAGIC = b"SEGT"
VERSION = 1
DTYPE_F32 = 1
_HEADER = struct.Struct("<4sBBxxIII")


def dumps_dtf(grid) -> bytes:
    g = as_grid(grid, dtype=np.float32)
    h, w, c = g.shape
    return _HEADER.pack(MAGIC, VERSION, DTYPE_F32, h, w, c) + g.astype("<f4").tobytes()


def loads_dtf(data: bytes) -> np.ndarray:
    if len(data) < _HEADER.size:
        raise FormatError("truncated .dtf header")
    magic, version, dtype, h, w, c = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported .dtf version {version}")
    if dtype != DTYPE_F32:
        raise FormatError(f"unsupported .dtf dtype {dtype}")
    if data[6:8] != b"\x00\x00":
        raise FormatError("reserved header bytes must be zero")
    n = h * w * c
    body = data[_HEADER.size:]
    if len(body) != 4 * n:
        raise FormatError(f"expected {4 * n} data bytes, found {len(body)}")
    a = np.frombuffer(body, dtype="<f4").astype(np.float32).reshape(h, w, c)
    if not np.all(np.isfinite(a)):
        raise FormatError("non-finite values in .dtf payload")
    return a


def write_dtf(path, grid) -> None:
    Path(path).write_bytes(dumps_dtf(grid))


def read_dtf(path) -> np.ndarray:
    return loads_dtf(Path(path).read_bytes())


def write_mask_png(path, mask) -> None:
    """Write an 8-bit single-channel mask (labels, or 0/255 drop masks)."""
    m = np.asarray(mask)
    if m.dtype == bool:
        m = m.astype(np.uint8) * 255
    m = check_label_mask(m)
    Image.fromarray(m, mode="L").save(path, format="PNG")


def read_mask_png(path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            if im.mode not in ("L", "P"):
                raise FormatError(f"{path}: expected an 8-bit single-channel PNG, got mode {im.mode}")
            return np.array(im, dtype=np.uint8)
    except (OSError, SyntaxError) as exc:
        raise FormatError(f"{path}: {exc}") from exc


def write_image_png(path, image) -> None:
    """Write an (H, W, 3) image with values in [0, 1] as 8-bit RGB."""
    x = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    Image.fromarray(np.round(x * 255.0).astype(np.uint8), mode="RGB").save(path, format="PNG")


def read_image_png(path) -> np.ndarray:
    """Read an RGB PNG as float32 in [0, 1]."""
    try:
        with Image.open(path) as im:
            rgb = np.array(im.convert("RGB"), dtype=np.float32)
    except (OSError, SyntaxError) as exc:
        raise FormatError(f"{path}: {exc}") from exc
    return rgb / np.float32(255.0)


def parse_class_list(text: str) -> list[int]:
    """Parse ``"1,3"`` into ``[1, 3]``; the empty string gives ``[]``."""
    text = text.strip()
    if not text:
        return []
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise FormatError(f"bad class list {text!r}") from exc


def read_present_json(path) -> list[int]:
    """Read a class sidecar: either ``[1, 3]`` or ``{"present": [1, 3]}``."""
    try:
        obj = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if isinstance(obj, dict):
        obj = obj.get("present")
    if not isinstance(obj, list) or not all(isinstance(c, int) for c in obj):
        raise FormatError(f"{path}: expected a list of class indices")
    return obj
