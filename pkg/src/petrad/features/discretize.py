from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DiscretizationSpec:
    bin_count: int = 64

    def __post_init__(self):
        if self.bin_count < 2:
            raise ValueError("bin_count must be at least 2")


@dataclass
class GreyLevelVolume:
    """Integer grey levels 1..n_levels inside the ROI, 0 elsewhere."""

    levels: np.ndarray
    n_levels: int

    @property
    def roi(self) -> np.ndarray:
        return self.levels > 0


def discretize(values: np.ndarray, roi: np.ndarray, spec: DiscretizationSpec | int = 64) -> GreyLevelVolume:
    """Fixed bin count over the ROI min..max range.

    level = min(N, 1 + floor(N * (v - min) / (max - min))); a constant ROI
    collapses to a single level.
    """
    if isinstance(spec, (int, np.integer)):
        spec = DiscretizationSpec(int(spec))
    roi = np.asarray(roi, dtype=bool)
    vals = np.asarray(values, dtype=np.float64)[roi]
    if vals.size == 0:
        raise ValueError("cannot discretise an empty ROI")
    n = spec.bin_count
    lo, hi = vals.min(), vals.max()
    levels = np.zeros(roi.shape, dtype=np.int32)
    if hi > lo:
        lv = 1 + np.floor(n * (vals - lo) / (hi - lo))
        levels[roi] = np.minimum(lv, n).astype(np.int32)
        return GreyLevelVolume(levels, n)
    levels[roi] = 1
    return GreyLevelVolume(levels, 1)
