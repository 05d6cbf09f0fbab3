from __future__ import annotations

import json
from pathlib import Path

import pytest

from petrad import cli

TINY = {
    "phantom": {"n": 40, "prevalence": 0.3, "grid": [40, 40, 24], "radius_mm": [6.0, 11.0]},
    "preprocess": {"patch_dims": [32, 32, 32]},
    "experiment": {"n_repeats": 2, "n_train": 28, "n_valid": 12, "folds": 3,
                   "selectors": ["SIS", "RF"], "classifiers": ["LDA", "RF"], "k_grid": [8],
                   "rf_trees": 50},
    "dlr": {"arch": {"input_dims": [32, 32, 32], "alpha": 0.125},
            "train": {"max_epochs": 1, "batch_size": 8}, "n_train": 28, "n_valid": 12,
            "n_repeats": 1, "variants": ["PC", "CT"]},
}
PIPELINE = [["phantom", "gen"], ["preprocess"], ["extract"], ["cr-grid"], ["dlr-train"],
            ["dlr-eval"], ["report"]]


def run_pipeline(out: Path, config: Path, threads: int, seed: int = 3) -> None:
    for cmd in PIPELINE:
        rc = cli.main([*cmd, "--config", str(config), "--seed", str(seed), "--out", str(out),
                       "--threads", str(threads)])
        assert rc == 0, cmd


def snapshot(out: Path) -> dict:
    """Every file's bytes except the manifests, which carry wall-clock timings
    and the thread count; their output digests are compared instead."""
    snap = {}
    for p in sorted(out.rglob("*")):
        if not p.is_file():
            continue
        rel = str(p.relative_to(out))
        if p.name == cli.MANIFEST:
            man = json.loads(p.read_text())
            snap[rel] = (man["outputs"], man["outputs_digest"], man["key"])
        else:
            snap[rel] = p.read_bytes()
    return snap


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    base = tmp_path_factory.mktemp("cli")
    cfg = base / "tiny.json"
    cfg.write_text(json.dumps(TINY))
    run_pipeline(base / "a", cfg, 1)
    run_pipeline(base / "b", cfg, 2)
    return base, cfg


def test_pipeline_outputs(runs):
    base, _ = runs
    a = base / "a"
    for stage, files in (("phantom", ["manifest.csv"]), ("preprocess", ["index.csv"]),
                         ("extract", ["features.csv"]),
                         ("cr-grid", ["report.json", "heatmap_auc.csv"]),
                         ("dlr-train", ["model.arc", "loss_curve.csv", "metrics.json"]),
                         ("dlr-eval", ["variants.csv", "report.json"]),
                         ("report", ["top_combinations.csv", "dlr_variants.csv"])):
        d = a / cli.STAGE_DIRS[stage]
        for f in files + [cli.MANIFEST, cli.EFFECTIVE]:
            assert (d / f).exists(), d / f
        assert not (d / cli.INCOMPLETE).exists()


def test_identical_across_threads(runs):
    base, _ = runs
    a, b = snapshot(base / "a"), snapshot(base / "b")
    assert a.keys() == b.keys()
    assert [k for k in a if a[k] != b[k]] == []


def test_rerun_byte_identical_and_skip(runs, tmp_path):
    base, cfg = runs
    before = snapshot(base / "a")
    rc = cli.main(["extract", "--config", str(cfg), "--seed", "3", "--out", str(base / "a")])
    assert rc == 0
    # an up-to-date stage is skipped: not even the manifest is rewritten
    assert snapshot(base / "a") == before
    rc = cli.main(["extract", "--config", str(cfg), "--seed", "3", "--out", str(base / "a"),
                   "--force"])
    assert rc == 0 and snapshot(base / "a") == before


def test_effective_config_has_defaults(runs):
    base, _ = runs
    eff = json.loads((base / "a" / cli.STAGE_DIRS["extract"] / cli.EFFECTIVE).read_text())
    assert eff["seed"] == 3
    assert eff["features"] == {"bin_count": 64, "wavelet": "coif1"}
    assert eff["experiment"]["n_train"] == 28 and eff["dlr"]["train"]["lr"] == 1e-4


def test_missing_features_names_extract(tmp_path, runs, caplog):
    _, cfg = runs
    rc = cli.main(["cr-grid", "--config", str(cfg), "--seed", "3", "--out", str(tmp_path)])
    assert rc == 1
    assert "petrad extract" in caplog.text


def test_missing_upstream_stage(tmp_path, runs, caplog):
    _, cfg = runs
    rc = cli.main(["preprocess", "--config", str(cfg), "--seed", "3", "--out", str(tmp_path)])
    assert rc == 1 and "petrad phantom" in caplog.text


@pytest.mark.parametrize("bad", [
    {"phantom": {"n": 1}},
    {"phantom": {"colour": "red"}},
    {"preprocess": {"lo_pct": 90.0, "hi_pct": 10.0}},
    {"experiment": {"n_train": 10}},
    {"dlr": {"arch": {"input_dims": [48, 48, 32]}}},
])
def test_config_validation(tmp_path, bad):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps(bad))
    rc = cli.main(["phantom", "gen", "--config", str(cfg), "--seed", "1", "--out",
                   str(tmp_path / "o")])
    assert rc == 1


def test_seed_required(tmp_path):
    assert cli.main(["phantom", "gen", "--out", str(tmp_path)]) == 1
    with pytest.raises(cli.ValidationError):
        cli.effective_config({}, None)


def test_invalid_json(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text("{nope")
    assert cli.main(["phantom", "gen", "--config", str(cfg), "--seed", "1",
                     "--out", str(tmp_path)]) == 1
