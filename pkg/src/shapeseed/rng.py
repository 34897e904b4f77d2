"""Counter-based random numbers.

Each draw is a pure function of ``(seed, counter, draw)``, so results do not
depend on evaluation order or on how work is split across workers. The mixer
is the SplitMix64 finalizer applied twice.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def counter_bits(seed: int, counter, draw=0) -> np.ndarray:
    """64 pseudo-random bits per ``(counter, draw)`` pair, broadcast together."""
    counter = np.asarray(counter, dtype=np.uint64)
    draw = np.asarray(draw, dtype=np.uint64)
    key = np.uint64(int(seed) & _MASK64)
    with np.errstate(over="ignore"):
        z = _mix(key + _GOLDEN * (counter + np.uint64(1)))
        z = _mix(z + _GOLDEN * (draw + np.uint64(1)))
    return z


def counter_uniform(seed: int, counter, draw=0) -> np.ndarray:
    """Uniform float64 values in [0, 1) keyed by ``(seed, counter, draw)``."""
    bits = counter_bits(seed, counter, draw)
    return (bits >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
