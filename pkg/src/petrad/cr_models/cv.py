"""Stratified k-fold grid search with feature selection inside each fold."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import rng as rngmod
from ..metrics import auc
from .classifiers import ClassifierSpec, predict_score, regularisation_key, train_classifier
from .selectors import SelectorSpec, rank_features

DEFAULT_K_GRID = (8, 16, 32, 64)


def stratified_folds(y, n_folds: int, seed: int = 0) -> list[np.ndarray]:
    """Validation index sets; each class is shuffled and dealt round-robin."""
    y = np.asarray(y)
    n = len(y)
    if n_folds < 2:
        raise ValueError("need at least two folds")
    if n_folds > n:
        raise ValueError(f"{n_folds} folds requested for {n} samples")
    g = rngmod.stream(seed, "cv-folds")
    assign = np.empty(n, dtype=np.int64)
    offset = 0
    for c in (0, 1):
        idx = np.nonzero(y == c)[0]
        if len(idx) < n_folds:
            raise ValueError(
                f"class {c} has {len(idx)} samples, fewer than {n_folds} folds; "
                "some validation folds would contain a single class")
        idx = idx[g.permutation(len(idx))]
        assign[idx] = (np.arange(len(idx)) + offset) % n_folds
        offset += len(idx)
    return [np.nonzero(assign == f)[0] for f in range(n_folds)]


def design(X, cols, tnm=None) -> np.ndarray:
    Xs = np.asarray(X)[:, cols]
    if tnm is None:
        return Xs
    return np.hstack([Xs, np.asarray(tnm, dtype=np.float64).reshape(-1, 1)])


@dataclass
class CVResult:
    best: dict                          # {"k": int, "params": dict}
    table: list                         # (k, params, mean AUC) per configuration


def fold_rankings(X, y, folds, selector: SelectorSpec) -> list[np.ndarray]:
    n = len(y)
    out = []
    for f, va in enumerate(folds):
        tr = np.setdiff1d(np.arange(n), va)
        spec = SelectorSpec(**{**selector.__dict__, "seed": rngmod.child_seed(selector.seed, "fold", f)})
        out.append(rank_features(X[tr], y[tr], spec)[0])
    return out


def cross_validate(X, y, classifier: ClassifierSpec, k_grid=DEFAULT_K_GRID, folds: int = 5,
                   selector: SelectorSpec | None = None, rankings=None, tnm=None,
                   seed: int = 0, fold_sets=None) -> CVResult:
    """Pick (k, hyper-parameters) maximising mean validation AUC.

    Feature rankings come from ``rankings`` (one per fold) or are computed from
    ``selector`` on each fold's training part. Without either, all columns are
    used in their given order. Ties prefer smaller k, then stronger
    regularisation, then the lexicographically first parameter set.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.int64)
    n, d = X.shape
    fold_sets = fold_sets if fold_sets is not None else stratified_folds(y, folds, seed)
    if rankings is None:
        if selector is not None:
            rankings = fold_rankings(X, y, fold_sets, selector)
        else:
            rankings = [np.arange(d)] * len(fold_sets)
    ks = sorted({min(int(k), d) for k in k_grid}) if selector is not None or rankings else [d]
    confs = classifier.configurations()
    table = []
    for k in ks:
        for params in confs:
            aucs = []
            for f, va in enumerate(fold_sets):
                tr = np.setdiff1d(np.arange(n), va)
                cols = rankings[f][:k]
                t_tr = None if tnm is None else np.asarray(tnm)[tr]
                t_va = None if tnm is None else np.asarray(tnm)[va]
                model = train_classifier(design(X[tr], cols, t_tr), y[tr], classifier.method,
                                         params, seed=rngmod.child_seed(seed, "cv-fit", f))
                aucs.append(auc(predict_score(model, design(X[va], cols, t_va)), y[va]))
            table.append((k, params, float(np.mean(aucs))))
    top = max(t[2] for t in table)
    tied = [t for t in table if t[2] >= top - 1e-12]
    tied.sort(key=lambda t: (t[0], regularisation_key(t[1], t[0] + (tnm is not None)),
                             repr(sorted(t[1].items()))))
    return CVResult({"k": tied[0][0], "params": tied[0][1]}, table)
