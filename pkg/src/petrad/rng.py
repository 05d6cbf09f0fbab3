"""Keyed random streams.

Every random draw in the package comes from a generator keyed by a tuple of
integers (master seed, entity index, purpose, ...). Streams are therefore
independent of evaluation order, which keeps results identical no matter how
work is scheduled across processes.
"""
from __future__ import annotations

import zlib

import numpy as np


def purpose(name: str) -> int:
    """Stable 32-bit integer tag for a purpose string."""
    return zlib.crc32(name.encode("utf-8"))


def _key(k) -> int:
    if isinstance(k, str):
        return purpose(k)
    k = int(k)
    if k < 0:
        raise ValueError("stream keys must be non-negative")
    return k


def stream(seed: int, *keys) -> np.random.Generator:
    """Counter-based (Philox) generator keyed by ``(seed, *keys)``."""
    ss = np.random.SeedSequence([_key(seed), *(_key(k) for k in keys)])
    return np.random.Generator(np.random.Philox(ss))


def child_seed(seed: int, *keys) -> int:
    """Derive a 32-bit integer seed, e.g. for numba-side generators."""
    return int(stream(seed, *keys).integers(0, 2**31 - 1))
