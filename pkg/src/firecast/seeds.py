"""Deterministic 64-bit mixing for seeds and split hashing.

Everything downstream that needs per-key randomness (cell splits, per
swath observation seeds) goes through mix64 so results depend only on
the key values, never on iteration order or process state.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return (z ^ (z >> 31)) & _MASK


def mix64(*parts: int) -> int:
    """Collapse any tuple of integers into one well-mixed 64-bit value."""
    h = 0x6A09E667F3BCC909
    for part in parts:
        h = _splitmix64(h ^ (int(part) & _MASK))
    return h


def unit_uniform(*parts: int) -> float:
    """Uniform in [0, 1), a pure function of the given integers."""
    return mix64(*parts) / 2.0**64
