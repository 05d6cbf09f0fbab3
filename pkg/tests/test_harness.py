from __future__ import annotations

import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles as O
from petrad.cr_models import CLASSIFIERS, SELECTORS
from petrad.harness import (ExperimentConfig, emit_report, grid_from_means, run_cr_grid,
                            summarize, top_combinations)
from petrad.metrics import auc, classification_metrics, roc_points

# ---------------------------------------------------------------------- AUC


def test_auc_examples():
    assert auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75
    assert auc([1, 2, 3, 4], [0, 0, 1, 1]) == 1.0
    assert auc([2, 2, 2, 2], [0, 1, 0, 1]) == 0.5
    with pytest.raises(ValueError):
        auc([1, 2], [1, 1])


@given(st.integers(0, 10 ** 6))
@settings(max_examples=100, deadline=None)
def test_auc_equals_pair_count(seed):
    g = np.random.default_rng(seed)
    n = int(g.integers(2, 201))
    y = g.integers(0, 2, n)
    y[:2] = [0, 1]
    s = g.integers(0, int(g.integers(1, 12)), n).astype(float)   # heavy ties
    assert auc(s, y) == float(O.auc_pairs(s.tolist(), y.tolist()))


@given(st.integers(0, 10 ** 6))
@settings(max_examples=50, deadline=None)
def test_auc_monotone_invariance(seed):
    g = np.random.default_rng(seed)
    s = g.normal(size=40)
    y = np.r_[0, 1, g.integers(0, 2, 38)]
    assert auc(np.exp(3 * s) + 1, y) == auc(s, y)
    n1 = int(y.sum())
    pairs = n1 * (len(y) - n1)
    assert round(auc(-s, y) * pairs) == pairs - round(auc(s, y) * pairs)


def test_confusion_metrics():
    pred = [1, 1, 1, 1, 0, 0, 0, 0, 0, 0]
    y = [1, 1, 1, 0, 1, 1, 0, 0, 0, 0]
    m = classification_metrics(pred, y)
    assert m["error"] == pytest.approx(0.3) and m["precision"] == 0.75 and m["recall"] == 0.6
    assert m["f1"] == pytest.approx(2 / 3)
    assert classification_metrics(y, y) == {"error": 0.0, "precision": 1.0, "recall": 1.0,
                                            "f1": 1.0}
    z = classification_metrics([0] * 10, y)
    assert z["precision"] == 0 and z["recall"] == 0 and z["f1"] == 0


def test_roc_points_endpoints_and_area():
    g = np.random.default_rng(0)
    s = g.integers(0, 6, 50).astype(float)
    y = np.r_[0, 1, g.integers(0, 2, 48)]
    thr, fpr, tpr = roc_points(s, y)
    assert (fpr[0], tpr[0], fpr[-1], tpr[-1]) == (0, 0, 1, 1)
    assert thr[0] == np.inf and (np.diff(fpr) >= 0).all() and (np.diff(tpr) >= 0).all()
    assert np.trapezoid(tpr, fpr) == pytest.approx(auc(s, y), abs=1e-12)


# ------------------------------------------------------------ aggregation

def test_summarize():
    s = summarize([0.1, 0.3, None, 0.2])
    assert s["n"] == 3 and s["mean"] == pytest.approx(0.2)
    assert s["sd"] == pytest.approx(0.1) and s["min"] <= s["mean"] <= s["max"]
    assert summarize([])["mean"] is None


# -------------------------------------------------------- top combinations

def _crafted(both, auc_only, err_only):
    sels, clfs = SELECTORS, CLASSIFIERS
    cells = [(s, c) for s in sels for c in clfs]
    am = {k: 0.6 for k in cells}
    em = {k: 0.4 for k in cells}
    for i, k in enumerate(both):
        am[k], em[k] = 0.9 - 0.01 * i, 0.1 + 0.01 * i
    for i, k in enumerate(auc_only):
        am[k] = 0.85 - 0.01 * i
    for i, k in enumerate(err_only):
        em[k] = 0.15 + 0.01 * i
    return grid_from_means(am, em)


def test_top_combinations_crafted():
    cells = [(s, c) for s in SELECTORS for c in CLASSIFIERS]
    both, a_only, e_only = cells[3:6], cells[10:12], cells[20:22]
    assert top_combinations(_crafted(both, a_only, e_only)) == both


def test_top_combinations_disjoint():
    cells = [(s, c) for s in SELECTORS for c in CLASSIFIERS]
    assert top_combinations(_crafted([], cells[:5], cells[5:10])) == []


def test_top_combinations_reference_grid():
    am = {("RF", "RF"): 0.796, ("RF", "AdaBoost"): 0.783, ("SIS", "LSVM"): 0.778,
          ("L1-LOG", "L2-LOG"): 0.772, ("L1-LOG", "KSVM"): 0.769}
    em = {("RF", "RF"): 0.267, ("RF", "KSVM"): 0.283, ("RF", "AdaBoost"): 0.286,
          ("L1-LOG", "KSVM"): 0.298, ("RF", "KNN"): 0.301}
    g = np.random.default_rng(0)
    A, E = {}, {}
    for s in SELECTORS:
        for c in CLASSIFIERS:
            A[s, c] = am.get((s, c), float(g.uniform(0.6, 0.76)))
            E[s, c] = em.get((s, c), float(g.uniform(0.31, 0.4)))
    got = top_combinations(grid_from_means(A, E))
    assert got == [("RF", "RF"), ("RF", "AdaBoost"), ("L1-LOG", "KSVM")]


# ------------------------------------------------------------------- grid

@pytest.fixture(scope="module")
def small_data():
    g = np.random.default_rng(3)
    n, d = 60, 30
    y = np.r_[np.zeros(40, int), np.ones(20, int)]
    X = g.normal(size=(n, d))
    X[:, 0] += 2.0 * y
    return X, y, g.integers(0, 2, n).astype(float)


def test_grid_cardinality_and_consistency(small_data, tmp_path):
    X, y, tnm = small_data
    cfg = ExperimentConfig(n_repeats=2, n_train=40, n_valid=20, selectors=("SIS",),
                           classifiers=("LDA",), k_grid=(1, 4))
    rep = run_cr_grid(X, y, tnm, cfg)
    assert len(rep.rows) == 2 and len(rep.aggregate) == 1
    cell = rep.cell("SIS", "LDA")
    for m in ("auc", "error", "f1"):
        vals = [r[m] for r in rep.rows]
        assert all(0 <= v <= 1 for v in vals)
        assert cell[m]["mean"] == pytest.approx(np.mean(vals), abs=1e-15)
        assert cell[m]["sd"] == pytest.approx(np.std(vals, ddof=1), abs=1e-15)
    emit_report(rep, tmp_path)
    data = json.loads((tmp_path / "report.json").read_text())
    assert len(data["rows"]) == 2


def test_emit_report_shapes(small_data, tmp_path):
    X, y, tnm = small_data
    cfg = ExperimentConfig(n_repeats=1, n_train=40, n_valid=20, k_grid=(2,), rf_trees=20,
                           grids={"Nnet": {"size": [4], "decay": [0.01]},
                                  "KSVM": {"C": [1.0], "gamma": [0.1]}})
    rep = run_cr_grid(X, y, tnm, cfg)
    assert len(rep.aggregate) == 54 and all(a["n_ok"] == 1 for a in rep.aggregate)
    emit_report(rep, tmp_path)
    rows = list(csv.reader(open(tmp_path / "heatmap_auc.csv")))
    assert len(rows) == 7 and all(len(r) == 10 for r in rows)
    assert len(list(csv.reader(open(tmp_path / "scatter.csv")))) == 55


def test_grid_thread_invariance(small_data):
    X, y, tnm = small_data
    cfg = ExperimentConfig(n_repeats=2, n_train=40, n_valid=20, selectors=("SIS", "RF"),
                           classifiers=("L2-LOG", "RF"), k_grid=(2, 4), rf_trees=30)
    a = run_cr_grid(X, y, tnm, cfg, threads=1)
    b = run_cr_grid(X, y, tnm, cfg, threads=2)
    assert json.dumps(a.to_json(), sort_keys=True) == json.dumps(b.to_json(), sort_keys=True)
    assert a.roc == b.roc


def test_grid_size_mismatch(small_data):
    X, y, tnm = small_data
    with pytest.raises(ValueError):
        run_cr_grid(X, y, tnm, ExperimentConfig(n_train=40, n_valid=10))
