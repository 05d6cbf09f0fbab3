from __future__ import annotations

import math

import numpy as np

from .discretize import GreyLevelVolume

FOS_NAMES = (
    "Energy", "TotalEnergy", "Entropy", "Minimum", "10Percentile", "90Percentile", "Maximum",
    "Mean", "Median", "InterquartileRange", "Range", "MeanAbsoluteDeviation",
    "RobustMeanAbsoluteDeviation", "RootMeanSquared", "StandardDeviation", "Skewness",
    "Kurtosis", "Variance", "Uniformity",
)


def nearest_rank(sorted_vals: np.ndarray, pct: float) -> float:
    """Nearest-rank percentile of an ascending array."""
    n = sorted_vals.size
    rank = max(1, math.ceil(pct / 100.0 * n))
    return float(sorted_vals[rank - 1])


def fos_features(values: np.ndarray, roi: np.ndarray, glv: GreyLevelVolume,
                 voxel_volume: float = 1.0) -> dict[str, float]:
    """First-order statistics of ROI intensities.

    Entropy and uniformity use the discretised histogram; everything else the
    raw intensities. Percentiles are nearest-rank.
    """
    x = np.sort(np.asarray(values, dtype=np.float64)[np.asarray(roi, dtype=bool)])
    if x.size == 0:
        raise ValueError("empty ROI")
    n = x.size
    mean = float(x.mean())
    dev = x - mean
    var = float((dev ** 2).mean())
    m3, m4 = float((dev ** 3).mean()), float((dev ** 4).mean())
    if var > 0:
        skew, kurt = m3 / var ** 1.5, m4 / var ** 2
    else:
        skew = kurt = 0.0
    p10, p90 = nearest_rank(x, 10), nearest_rank(x, 90)
    robust = x[(x >= p10) & (x <= p90)]
    rmad = float(np.abs(robust - robust.mean()).mean())
    counts = np.bincount(glv.levels[glv.levels > 0])[1:]
    p = counts[counts > 0] / n
    energy = float((x ** 2).sum())
    return dict(zip(FOS_NAMES, [
        energy,
        energy * voxel_volume,
        float(-(p * np.log2(p)).sum()),
        float(x[0]),
        p10,
        p90,
        float(x[-1]),
        mean,
        float(np.median(x)),
        nearest_rank(x, 75) - nearest_rank(x, 25),
        float(x[-1] - x[0]),
        float(np.abs(dev).mean()),
        rmad,
        math.sqrt(energy / n),
        math.sqrt(var),
        skew,
        kurt,
        var,
        float((p ** 2).sum()),
    ]))
