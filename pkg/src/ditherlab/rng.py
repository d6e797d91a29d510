"""Deterministic seed derivation.

All randomness in the package flows from numpy Generators whose seeds are
derived here. A derived seed depends only on (master seed, string tag,
integer index), never on Python's salted ``hash()`` or on iteration order,
so every run with the same master seed reproduces byte for byte regardless
of thread count or platform.
"""

from __future__ import annotations

import numpy as np

__all__ = ["mix64", "tag64", "derive_seed", "stream", "mix64_array"]

_MASK = (1 << 64) - 1

# splitmix64 finalizer constants
_GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

# FNV-1a 64-bit constants
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def mix64(value: int) -> int:
    """splitmix64 finalizer: a 64-bit bijective scrambler."""
    z = (value + _GAMMA) & _MASK
    z = ((z ^ (z >> 30)) * _M1) & _MASK
    z = ((z ^ (z >> 27)) * _M2) & _MASK
    return (z ^ (z >> 31)) & _MASK


def mix64_array(values: np.ndarray) -> np.ndarray:
    """Vectorized splitmix64 finalizer over a uint64 array."""
    with np.errstate(over="ignore"):
        z = (values + np.uint64(_GAMMA)).astype(np.uint64)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
        return z ^ (z >> np.uint64(31))


def tag64(tag: str) -> int:
    """FNV-1a over the UTF-8 bytes of ``tag``. Stable across processes."""
    acc = _FNV_OFFSET
    for byte in tag.encode("utf-8"):
        acc = ((acc ^ byte) * _FNV_PRIME) & _MASK
    return acc


def derive_seed(master: int, tag: str, index: int = 0) -> int:
    """Derive a 64-bit child seed from a master seed, a role tag and an index."""
    acc = mix64(master & _MASK)
    acc = mix64(acc ^ tag64(tag))
    acc = mix64(acc ^ (index & _MASK))
    return acc


def stream(master: int, tag: str, index: int = 0) -> np.random.Generator:
    """A numpy Generator seeded by :func:`derive_seed`."""
    return np.random.Generator(np.random.PCG64(derive_seed(master, tag, index)))
