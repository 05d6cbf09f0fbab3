from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class StandardizeStats:
    mean: np.ndarray
    sd: np.ndarray


def standardize_fit(X) -> StandardizeStats:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("standardisation needs a 2D matrix with at least two rows")
    mean = X.mean(axis=0)
    sd = X.std(axis=0)
    # relative test so that columns constant up to rounding count as constant
    scale = np.maximum(np.abs(mean), 1.0)
    sd = np.where(sd > 1e-12 * scale, sd, 0.0)
    return StandardizeStats(mean, sd)


def standardize_apply(stats: StandardizeStats, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    safe = np.where(stats.sd > 0, stats.sd, 1.0)
    Z = (X - stats.mean) / safe
    Z[..., stats.sd == 0] = 0.0
    return Z
