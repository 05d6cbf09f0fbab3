"""Single-level separable 3D discrete wavelet transform (periodised).

Orthonormal filters make the transform an orthogonal map, so the inverse is
its transpose and reconstruction is exact up to rounding.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

_S7 = math.sqrt(7.0)
_C = 16.0 * math.sqrt(2.0)
FILTERS = {
    "haar": np.array([1.0, 1.0]) / math.sqrt(2.0),
    # 6-tap Coiflet, closed form
    "coif1": np.array([1 - _S7, 5 + _S7, 14 + 2 * _S7, 14 - 2 * _S7, 1 - _S7, -3 + _S7]) / _C,
}
SUBBANDS = tuple("".join(s) for s in itertools.product("LH", repeat=3))


def filter_pair(name: str) -> tuple[np.ndarray, np.ndarray]:
    try:
        h = FILTERS[name]
    except KeyError:
        raise ValueError(f"unknown wavelet {name!r}; choose from {sorted(FILTERS)}") from None
    k = np.arange(h.size)
    g = (-1.0) ** k * h[::-1]
    return h, g


def _taps(n: int, length: int) -> np.ndarray:
    """Input index (2m + k - shift) mod n for every output m and tap k."""
    shift = length // 2 - 1
    m = np.arange(n // 2)[:, None]
    k = np.arange(length)[None, :]
    return (2 * m + k - shift) % n


def _analyse(x: np.ndarray, axis: int, h: np.ndarray, g: np.ndarray):
    x = np.moveaxis(x, axis, -1)
    idx = _taps(x.shape[-1], h.size)
    gathered = x[..., idx]  # (..., n/2, L)
    lo = gathered @ h
    hi = gathered @ g
    return np.moveaxis(lo, -1, axis), np.moveaxis(hi, -1, axis)


def _synthesise(lo: np.ndarray, hi: np.ndarray, axis: int, h: np.ndarray, g: np.ndarray):
    lo, hi = np.moveaxis(lo, axis, -1), np.moveaxis(hi, axis, -1)
    n = 2 * lo.shape[-1]
    idx = _taps(n, h.size)
    out = np.zeros(lo.shape[:-1] + (n,), dtype=np.result_type(lo, hi))
    for k in range(h.size):
        # for a fixed tap the target indices are distinct
        out[..., idx[:, k]] += h[k] * lo + g[k] * hi
    return np.moveaxis(out, -1, axis)


def pad_even(x: np.ndarray) -> np.ndarray:
    pad = [(0, s % 2) for s in x.shape]
    return np.pad(x, pad, mode="edge") if any(p for _, p in pad) else x


def wavelet_decompose(x: np.ndarray, wavelet: str = "coif1") -> dict[str, np.ndarray]:
    """Eight half-size sub-bands keyed ``LLL`` .. ``HHH`` (letters = x, y, z)."""
    h, g = filter_pair(wavelet)
    bands = {"": pad_even(np.asarray(x, dtype=np.float64))}
    for axis in range(3):
        nxt = {}
        for key, arr in bands.items():
            lo, hi = _analyse(arr, axis, h, g)
            nxt[key + "L"], nxt[key + "H"] = lo, hi
        bands = nxt
    return {k: bands[k] for k in SUBBANDS}


def wavelet_reconstruct(bands: dict[str, np.ndarray], wavelet: str = "coif1") -> np.ndarray:
    h, g = filter_pair(wavelet)
    cur = dict(bands)
    for axis in (2, 1, 0):
        nxt = {}
        for key in {k[:axis] for k in cur}:
            nxt[key] = _synthesise(cur[key + "L"], cur[key + "H"], axis, h, g)
        cur = nxt
    return cur[""]


def decimate_mask(roi: np.ndarray) -> np.ndarray:
    """Nearest-neighbour factor-2 decimation of a binary mask.

    Falls back to "any voxel in the 2x2x2 block" if plain decimation empties a
    tiny ROI.
    """
    r = pad_even(np.asarray(roi, dtype=bool))
    sub = r[::2, ::2, ::2]
    if sub.any():
        return sub
    s = r.shape
    return r.reshape(s[0] // 2, 2, s[1] // 2, 2, s[2] // 2, 2).any(axis=(1, 3, 5))
