"""Repeated-split benchmark over selector x classifier combinations."""
from __future__ import annotations

import concurrent.futures as cf
import csv
import json
import logging
import multiprocessing as mp
import os
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import rng as rngmod
from .cr_models import (CLASSIFIERS, SELECTORS, ClassifierSpec, SelectorSpec, cross_validate,
                        design, predict_label, predict_proba, predict_score, rank_features,
                        standardize_apply, standardize_fit, stratified_folds, train_classifier)
from .cr_models.cv import DEFAULT_K_GRID
from .metrics import auc, classification_metrics, roc_points
from .phantom import split_indices

log = logging.getLogger(__name__)

METRICS = ("auc", "error", "precision", "recall", "f1")


@dataclass
class ExperimentConfig:
    n_repeats: int = 10
    n_train: int = 120
    n_valid: int = 50
    folds: int = 5
    seed: int = 0
    include_tnm: bool = True
    selectors: tuple[str, ...] = SELECTORS
    classifiers: tuple[str, ...] = CLASSIFIERS
    k_grid: tuple[int, ...] = DEFAULT_K_GRID
    rf_trees: int = 500
    grids: dict = field(default_factory=dict)

    def __post_init__(self):
        self.selectors = tuple(self.selectors)
        self.classifiers = tuple(self.classifiers)
        self.k_grid = tuple(int(k) for k in self.k_grid)
        if self.n_repeats < 1:
            raise ValueError("n_repeats must be at least 1")
        if self.n_train < 2 or self.n_valid < 1:
            raise ValueError("train/validation sizes too small")
        for s in self.selectors:
            if s not in SELECTORS:
                raise ValueError(f"unknown selector {s!r}")
        for c in self.classifiers:
            if c not in CLASSIFIERS:
                raise ValueError(f"unknown classifier {c!r}")

    def classifier_spec(self, name: str) -> ClassifierSpec:
        grid = dict(self.grids.get(name, {}))
        if name == "RF" and not grid:
            grid = {"n_trees": [self.rf_trees]}
        return ClassifierSpec(name, grid)


@dataclass
class EvaluationReport:
    config: dict
    rows: list            # one dict per (selector, classifier, repeat)
    aggregate: list       # one dict per (selector, classifier)
    roc: dict = field(default_factory=dict)   # "sel+clf" -> list of (repeat, thr, fpr, tpr)

    def cell(self, selector: str, classifier: str) -> dict:
        for a in self.aggregate:
            if a["selector"] == selector and a["classifier"] == classifier:
                return a
        raise KeyError((selector, classifier))

    def to_json(self) -> dict:
        return {"config": self.config, "rows": self.rows, "aggregate": self.aggregate,
                "top_combinations": [list(t) for t in top_combinations(self)]}


# -------------------------------------------------------------- aggregation

def summarize(values) -> dict:
    """mean, sd (n-1 denominator), linear 0.25/0.75 quantiles, min, max."""
    v = np.asarray([x for x in values if x is not None], dtype=np.float64)
    if v.size == 0:
        return {"mean": None, "sd": None, "q25": None, "q75": None, "min": None, "max": None,
                "n": 0}
    return {"mean": float(v.mean()), "sd": float(v.std(ddof=1)) if v.size > 1 else 0.0,
            "q25": float(np.quantile(v, 0.25)), "q75": float(np.quantile(v, 0.75)),
            "min": float(v.min()), "max": float(v.max()), "n": int(v.size)}


def aggregate(rows: list, selectors, classifiers) -> list:
    out = []
    for s in selectors:
        for c in classifiers:
            cell = [r for r in rows if r["selector"] == s and r["classifier"] == c]
            ok = [r for r in cell if r["status"] == "ok"]
            entry = {"selector": s, "classifier": c, "n_ok": len(ok),
                     "n_failed": len(cell) - len(ok)}
            for m in METRICS:
                entry[m] = summarize([r[m] for r in ok])
            out.append(entry)
    return out


# ------------------------------------------------------------ top selection

def _cells(grid) -> list:
    if isinstance(grid, EvaluationReport):
        grid = grid.aggregate
    return [g for g in grid if g["auc"]["mean"] is not None and g["error"]["mean"] is not None]


def top_combinations(grid, top: int = 5) -> list[tuple[str, str]]:
    """Cells that are both among the ``top`` highest mean AUC and the ``top``
    lowest mean testing error. Ties go to the lower sd, then to the
    lexicographically smaller (selector, classifier). Returned in AUC order."""
    cells = _cells(grid)
    ident = lambda g: (g["selector"], g["classifier"])
    by_auc = sorted(cells, key=lambda g: (-g["auc"]["mean"], g["auc"]["sd"] or 0.0, ident(g)))
    by_err = sorted(cells, key=lambda g: (g["error"]["mean"], g["error"]["sd"] or 0.0, ident(g)))
    best_err = {ident(g) for g in by_err[:top]}
    return [ident(g) for g in by_auc[:top] if ident(g) in best_err]


def grid_from_means(auc_mean: dict, err_mean: dict, auc_sd: dict | None = None,
                    err_sd: dict | None = None) -> list:
    """Aggregate-shaped records from {(selector, classifier): value} maps."""
    out = []
    for key in sorted(auc_mean):
        out.append({"selector": key[0], "classifier": key[1],
                    "auc": {"mean": auc_mean[key], "sd": (auc_sd or {}).get(key, 0.0)},
                    "error": {"mean": err_mean[key], "sd": (err_sd or {}).get(key, 0.0)}})
    return out


# ------------------------------------------------------------------ the grid

def evaluate_scores(score, proba_label, y) -> dict:
    m = classification_metrics(proba_label, y)
    m["auc"] = auc(score, y)
    return m


def _run_unit(args) -> list:
    """One (repeat, selector) unit: shared rankings, all classifiers."""
    X, y, tnm, cfg_dict, repeat, selector = args
    cfg = ExperimentConfig(**cfg_dict)
    n = len(y)
    tr, va = split_indices(n, cfg.n_train, cfg.n_valid, repeat, cfg.seed)
    base = {"selector": selector, "repeat": repeat}
    rows = []

    def failed(clf, exc):
        return {**base, "classifier": clf, "status": "failed",
                "message": f"{type(exc).__name__}: {exc}",
                **{m: None for m in METRICS}, "k": None, "params": None}

    try:
        stats = standardize_fit(X[tr])
        Xtr, Xva = standardize_apply(stats, X[tr]), standardize_apply(stats, X[va])
        ytr, yva = y[tr], y[va]
        if len(np.unique(yva)) < 2:
            raise ValueError("validation split contains a single class")
        folds = stratified_folds(ytr, cfg.folds, rngmod.child_seed(cfg.seed, "folds", repeat))
        sel_seed = rngmod.child_seed(cfg.seed, "selector", selector, repeat)
        spec = SelectorSpec(selector, k=max(cfg.k_grid), n_trees=cfg.rf_trees, seed=sel_seed)
        rankings = []
        for f, fva in enumerate(folds):
            ftr = np.setdiff1d(np.arange(len(ytr)), fva)
            fspec = SelectorSpec(**{**spec.__dict__,
                                    "seed": rngmod.child_seed(sel_seed, "fold", f)})
            rankings.append(rank_features(Xtr[ftr], ytr[ftr], fspec)[0])
        full_rank = rank_features(Xtr, ytr, spec)[0]
    except Exception as exc:  # noqa: BLE001 - recorded per cell
        return [failed(c, exc) for c in cfg.classifiers], {}

    roc = {}
    t_tr = tnm[tr] if cfg.include_tnm else None
    t_va = tnm[va] if cfg.include_tnm else None
    for clf in cfg.classifiers:
        try:
            cspec = cfg.classifier_spec(clf)
            fit_seed = rngmod.child_seed(cfg.seed, "fit", selector, clf, repeat)
            cv = cross_validate(Xtr, ytr, cspec, cfg.k_grid, selector=spec, rankings=rankings,
                                tnm=t_tr, seed=fit_seed, fold_sets=folds)
            k = cv.best["k"]
            cols = full_rank[:k]
            model = train_classifier(design(Xtr, cols, t_tr), ytr, clf, cv.best["params"],
                                     seed=fit_seed)
            Dva = design(Xva, cols, t_va)
            score = predict_score(model, Dva)
            m = evaluate_scores(score, predict_label(model, Dva), yva)
            thr, fpr, tpr = roc_points(score, yva)
            roc[f"{selector}+{clf}"] = [(repeat, float(a), float(b), float(c))
                                        for a, b, c in zip(thr, fpr, tpr)]
            rows.append({**base, "classifier": clf, "status": "ok", "message": "",
                         **{mm: float(m[mm]) for mm in METRICS}, "k": int(k),
                         "params": cv.best["params"]})
        except Exception as exc:  # noqa: BLE001
            log.warning("cell %s+%s repeat %d failed: %s", selector, clf, repeat, exc)
            rows.append(failed(clf, exc))
    return rows, roc


def _config_dict(cfg: ExperimentConfig) -> dict:
    d = asdict(cfg)
    d["selectors"] = list(cfg.selectors)
    d["classifiers"] = list(cfg.classifiers)
    d["k_grid"] = list(cfg.k_grid)
    return d


def run_cr_grid(X, y, tnm, config: ExperimentConfig, threads: int = 1,
                progress: bool = False) -> EvaluationReport:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.int64)
    tnm = np.asarray(tnm, dtype=np.float64)
    if config.n_train + config.n_valid != len(y):
        raise ValueError(f"train/valid sizes {config.n_train}+{config.n_valid} do not sum to "
                         f"cohort size {len(y)}")
    cfg_dict = _config_dict(config)
    units = [(X, y, tnm, cfg_dict, r, s) for r in range(config.n_repeats)
             for s in config.selectors]
    results = {}
    t0 = time.time()
    if threads <= 1:
        for u in units:
            results[(u[4], u[5])] = _run_unit(u)
            if progress:
                log.info("repeat %d selector %s done (%.0fs)", u[4], u[5], time.time() - t0)
    else:
        # fresh interpreters with single-threaded BLAS, so the worker count
        # cannot change any floating-point reduction order
        saved = {k: os.environ.get(k) for k in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS",
                                               "MKL_NUM_THREADS")}
        os.environ.update({k: "1" for k in saved})
        try:
            with cf.ProcessPoolExecutor(threads, mp_context=mp.get_context("spawn")) as ex:
                futs = {ex.submit(_run_unit, u): (u[4], u[5]) for u in units}
                for fut in cf.as_completed(futs):
                    results[futs[fut]] = fut.result()
                    if progress:
                        log.info("repeat %d selector %s done (%.0fs)", *futs[fut],
                                 time.time() - t0)
        finally:
            for k, v in saved.items():
                if v is None:
                    os.environ.pop(k, None)
                else:
                    os.environ[k] = v
    rows, roc = [], {}
    for s in config.selectors:
        for c in config.classifiers:
            for r in range(config.n_repeats):
                unit_rows, unit_roc = results[(r, s)]
                rows.extend(x for x in unit_rows if x["classifier"] == c)
                key = f"{s}+{c}"
                if key in unit_roc:
                    roc.setdefault(key, []).extend(unit_roc[key])
    return EvaluationReport(cfg_dict, rows, aggregate(rows, config.selectors, config.classifiers),
                            roc)


# --------------------------------------------------------------- file output

def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def _write_matrix(path: Path, report: EvaluationReport, metric: str, stat: str) -> None:
    sels = list(dict.fromkeys(a["selector"] for a in report.aggregate))
    clfs = list(dict.fromkeys(a["classifier"] for a in report.aggregate))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["selector", *clfs])
        for s in sels:
            w.writerow([s, *(_fmt(report.cell(s, c)[metric][stat]) for c in clfs)])


def emit_report(report: EvaluationReport, out_dir, svg: bool = False) -> Path:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"report directory {out} is not writable: {exc}") from exc
    _write_matrix(out / "heatmap_auc.csv", report, "auc", "mean")
    _write_matrix(out / "heatmap_auc_sd.csv", report, "auc", "sd")
    _write_matrix(out / "heatmap_err.csv", report, "error", "mean")
    _write_matrix(out / "heatmap_err_sd.csv", report, "error", "sd")
    with open(out / "scatter.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["selector", "classifier", "auc_mean", "error_mean", "auc_sd", "error_sd"])
        for a in report.aggregate:
            w.writerow([a["selector"], a["classifier"], _fmt(a["auc"]["mean"]),
                        _fmt(a["error"]["mean"]), _fmt(a["auc"]["sd"]), _fmt(a["error"]["sd"])])
    for key in sorted(report.roc):
        with open(out / f"roc_{key}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["repeat", "threshold", "fpr", "tpr"])
            for rep, thr, fpr, tpr in report.roc[key]:
                w.writerow([rep, _fmt(thr), _fmt(fpr), _fmt(tpr)])
    with open(out / "report.json", "w") as fh:
        json.dump(report.to_json(), fh, indent=1, sort_keys=True)
        fh.write("\n")
    if svg:
        render_svg(report, out)
    return out / "report.json"


def render_svg(report: EvaluationReport, out: Path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    sels = list(dict.fromkeys(a["selector"] for a in report.aggregate))
    clfs = list(dict.fromkeys(a["classifier"] for a in report.aggregate))
    plt.rcParams["svg.hashsalt"] = "petrad"
    meta = {"Date": None}
    for metric, name in (("auc", "heatmap_auc"), ("error", "heatmap_err")):
        M = np.array([[report.cell(s, c)[metric]["mean"] or np.nan for c in clfs] for s in sels])
        fig, ax = plt.subplots(figsize=(1 + 0.9 * len(clfs), 1 + 0.5 * len(sels)))
        im = ax.imshow(M, cmap="viridis")
        ax.set_xticks(range(len(clfs)), clfs, rotation=45, ha="right")
        ax.set_yticks(range(len(sels)), sels)
        for i in range(len(sels)):
            for j in range(len(clfs)):
                if np.isfinite(M[i, j]):
                    ax.text(j, i, f"{M[i, j]:.3f}", ha="center", va="center", fontsize=7,
                            color="white")
        fig.colorbar(im, ax=ax, label=f"mean {metric}")
        fig.tight_layout()
        fig.savefig(out / f"{name}.svg", metadata=meta)
        plt.close(fig)
    fig, ax = plt.subplots(figsize=(5, 4))
    for a in report.aggregate:
        if a["auc"]["mean"] is not None:
            ax.scatter(a["error"]["mean"], a["auc"]["mean"], s=12)
    ax.set_xlabel("mean testing error")
    ax.set_ylabel("mean AUC")
    fig.tight_layout()
    fig.savefig(out / "scatter.svg", metadata=meta)
    plt.close(fig)
