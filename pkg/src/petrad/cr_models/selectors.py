"""The six feature-ranking methods."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linear import l1svm_path, logistic_path, rank_from_path
from .trees import fit_forest

SELECTORS = ("L1-LOG", "L1-SVM", "RF", "DC", "EN-LOG", "SIS")


@dataclass(frozen=True)
class SelectorSpec:
    method: str
    k: int = 16
    n_lambda: int = 30
    lambda_ratio: float = 0.01
    en_mix: float = 0.5
    max_active: int = 100
    n_trees: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.method not in SELECTORS:
            raise ValueError(f"unknown selector {self.method!r}")
        if not 1 <= self.k <= 1456:
            raise ValueError(f"k must lie in [1, 1456], got {self.k}")


@dataclass
class Selection:
    ranking: np.ndarray      # all feature indices, best first
    selected: np.ndarray     # ranking[:k]
    scores: np.ndarray | None = None


def _check_binary(y) -> np.ndarray:
    y = np.asarray(y)
    if set(np.unique(y).tolist()) != {0, 1}:
        raise ValueError("feature selection needs both classes present in y")
    return y.astype(np.float64)


def _double_centre(D: np.ndarray) -> np.ndarray:
    return D - D.mean(axis=-1, keepdims=True) - D.mean(axis=-2, keepdims=True) \
        + D.mean(axis=(-1, -2), keepdims=True)


def dcor(x, y) -> float:
    """Biased-estimator distance correlation of two 1D samples."""
    return float(dcor_columns(np.asarray(x, dtype=np.float64)[:, None], y)[0])


def dcor_columns(X, y, chunk: int = 64) -> np.ndarray:
    """Distance correlation of every column of X with y (biased V-statistics)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    B = _double_centre(np.abs(y[:, None] - y[None, :]))
    vy = (B * B).mean()
    out = np.zeros(X.shape[1])
    for lo in range(0, X.shape[1], chunk):
        xc = X[:, lo:lo + chunk].T                                  # (c, n)
        A = _double_centre(np.abs(xc[:, :, None] - xc[:, None, :]))  # (c, n, n)
        vxy = (A * B).mean(axis=(1, 2))
        vx = (A * A).mean(axis=(1, 2))
        den = np.sqrt(vx * vy)
        r2 = np.divide(vxy, den, out=np.zeros_like(vxy), where=den > 0)
        out[lo:lo + chunk] = np.sqrt(np.clip(r2, 0.0, None))
    return out


def pearson_columns(X, y) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    xc = X - X.mean(axis=0)
    yc = y - y.mean()
    den = np.sqrt((xc * xc).sum(axis=0) * (yc * yc).sum())
    num = xc.T @ yc
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0)


def _rank_desc(scores: np.ndarray) -> np.ndarray:
    return np.lexsort((np.arange(len(scores)), -scores))


def rank_features(X, y, spec: SelectorSpec) -> tuple[np.ndarray, np.ndarray | None]:
    y = _check_binary(y)
    X = np.asarray(X, dtype=np.float64)
    if spec.method in ("L1-LOG", "EN-LOG"):
        mix = 1.0 if spec.method == "L1-LOG" else spec.en_mix
        path = logistic_path(X, y, mix, spec.n_lambda, spec.lambda_ratio, spec.max_active)
        return rank_from_path(path), None
    if spec.method == "L1-SVM":
        path = l1svm_path(X, y, spec.n_lambda, spec.lambda_ratio, spec.max_active)
        return rank_from_path(path), None
    if spec.method == "RF":
        forest = fit_forest(X, y, spec.n_trees, seed=spec.seed)
        return _rank_desc(forest.importances), forest.importances
    if spec.method == "DC":
        s = dcor_columns(X, y)
        return _rank_desc(s), s
    s = np.abs(pearson_columns(X, y))
    return _rank_desc(s), s


def fit_select(X, y, spec: SelectorSpec) -> Selection:
    ranking, scores = rank_features(X, y, spec)
    return Selection(ranking, ranking[:spec.k], scores)
