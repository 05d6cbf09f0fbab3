"""Command-line pipeline: phantom gen -> preprocess -> extract -> cr-grid, dlr-train/eval, report.

Every stage reads the effective configuration (defaults merged with the user's
JSON file and flags), writes its outputs into its own directory under
``--out`` together with ``effective_config.json`` and ``run_manifest.json``,
and skips work whose inputs and configuration are unchanged.
"""
from __future__ import annotations

import os

# single-threaded BLAS unless the caller chose otherwise; must precede numpy
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import argparse
import concurrent.futures as cf
import copy
import csv
import hashlib
import json
import logging
import multiprocessing as mp
import sys
import time
from dataclasses import asdict
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .cr_models import CLASSIFIERS, SELECTORS
from .cr_models.cv import DEFAULT_K_GRID
from .dlr import VARIANTS, DlrArchSpec, TrainConfig
from .features.extract import ExtractionConfig
from .harness import ExperimentConfig
from .phantom import CLASS0, CLASS1, PhantomSpec

log = logging.getLogger("petrad")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2
STAGES = ("phantom", "preprocess", "extract", "cr-grid", "dlr-train", "dlr-eval", "report")
STAGE_DIRS = {"phantom": "cohort", "preprocess": "preprocessed", "extract": "features",
              "cr-grid": "cr_grid", "dlr-train": "dlr_train", "dlr-eval": "dlr_eval",
              "report": "report"}
# the config sections each stage depends on (its cache key)
STAGE_SECTIONS = {"phantom": ("phantom",), "preprocess": ("preprocess",),
                  "extract": ("features",), "cr-grid": ("experiment",),
                  "dlr-train": ("dlr",), "dlr-eval": ("dlr",), "report": ("report",)}
MANIFEST = "run_manifest.json"
EFFECTIVE = "effective_config.json"
INCOMPLETE = ".incomplete"


class ValidationError(Exception):
    """Bad configuration or missing inputs (exit code 1)."""


# ------------------------------------------------------------------ config

def _phantom_defaults() -> dict:
    d = PhantomSpec().to_dict()
    d.pop("seed")
    for k in ("radius_mm", "grid", "spacing"):
        d[k] = list(d[k])
    return d


def default_config() -> dict:
    arch = asdict(DlrArchSpec())
    arch["input_dims"] = list(arch["input_dims"])
    train = asdict(TrainConfig())
    train.pop("seed")
    return {
        "phantom": _phantom_defaults(),
        "preprocess": {"patch_dims": [80, 80, 64], "lo_pct": 5.0, "hi_pct": 95.0,
                       "norm_mode": "percentile"},
        "features": asdict(ExtractionConfig()),
        "experiment": {"n_repeats": 10, "n_train": 120, "n_valid": 50, "folds": 5,
                       "include_tnm": True, "selectors": list(SELECTORS),
                       "classifiers": list(CLASSIFIERS), "k_grid": list(DEFAULT_K_GRID),
                       "rf_trees": 500, "grids": {}},
        "dlr": {"arch": arch, "train": train, "n_train": 120, "n_valid": 50,
                "n_repeats": 10, "variants": list(VARIANTS), "repeat": 0},
        "report": {"svg": False},
    }


_NUM = {"type": "number"}
_POS_INT = {"type": "integer", "minimum": 1}
_TRIPLE_INT = {"type": "array", "items": _POS_INT, "minItems": 3, "maxItems": 3}
_TRIPLE_NUM = {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0},
               "minItems": 3, "maxItems": 3}
_CLASS = {"type": "object", "additionalProperties": False,
          "required": list(asdict(CLASS0)),
          "properties": {k: _NUM for k in asdict(CLASS0)}}


def _obj(props: dict, required=None) -> dict:
    return {"type": "object", "additionalProperties": False, "properties": props,
            "required": list(props) if required is None else required}


SCHEMA = _obj({
    "seed": {"type": "integer", "minimum": 0},
    "phantom": _obj({
        "n": {"type": "integer", "minimum": 2},
        "prevalence": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "radius_mm": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0},
                      "minItems": 2, "maxItems": 2},
        "class0": _CLASS, "class1": _CLASS,
        "tnm_signal_strength": {"type": "number", "minimum": 0, "maximum": 1},
        "label_noise": {"type": "number", "minimum": 0, "exclusiveMaximum": 0.5},
        "grid": _TRIPLE_INT, "spacing": _TRIPLE_NUM,
        "surface_noise": {"type": "number", "minimum": 0},
    }),
    "preprocess": _obj({
        "patch_dims": _TRIPLE_INT,
        "lo_pct": {"type": "number", "minimum": 0, "maximum": 100},
        "hi_pct": {"type": "number", "minimum": 0, "maximum": 100},
        "norm_mode": {"enum": ["percentile", "scaled"]},
    }),
    "features": _obj({"bin_count": {"type": "integer", "minimum": 2},
                      "wavelet": {"enum": ["coif1", "haar"]}}),
    "experiment": _obj({
        "n_repeats": _POS_INT, "n_train": {"type": "integer", "minimum": 2},
        "n_valid": _POS_INT, "folds": {"type": "integer", "minimum": 2},
        "include_tnm": {"type": "boolean"},
        "selectors": {"type": "array", "items": {"enum": list(SELECTORS)}, "minItems": 1,
                      "uniqueItems": True},
        "classifiers": {"type": "array", "items": {"enum": list(CLASSIFIERS)}, "minItems": 1,
                        "uniqueItems": True},
        "k_grid": {"type": "array", "items": _POS_INT, "minItems": 1, "uniqueItems": True},
        "rf_trees": _POS_INT,
        "grids": {"type": "object", "propertyNames": {"enum": list(CLASSIFIERS)},
                  "additionalProperties": {"type": "object",
                                           "additionalProperties": {"type": "array",
                                                                    "minItems": 1}}},
    }),
    "dlr": _obj({
        "arch": _obj({"variant": {"enum": list(VARIANTS)}, "input_dims": _TRIPLE_INT,
                      "alpha": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                      "dropout": {"type": "number", "minimum": 0, "exclusiveMaximum": 1}}),
        "train": _obj({
            "batch_size": _POS_INT, "lr": {"type": "number", "exclusiveMinimum": 0},
            "max_epochs": _POS_INT, "patience": _POS_INT,
            "min_delta": {"type": "number", "minimum": 0}, "augment": {"type": "boolean"},
            "rotation": {"enum": ["continuous", "right-angle", "none"]},
            "max_shift": {"type": "integer", "minimum": 0},
            "class_weighted": {"type": "boolean"},
            "max_steps": {"oneOf": [{"type": "null"}, _POS_INT]},
        }),
        "n_train": {"type": "integer", "minimum": 2}, "n_valid": _POS_INT,
        "n_repeats": _POS_INT,
        "variants": {"type": "array", "items": {"enum": list(VARIANTS)}, "minItems": 1,
                     "uniqueItems": True},
        "repeat": {"type": "integer", "minimum": 0},
    }),
    "report": _obj({"svg": {"type": "boolean"}}),
})


def _merge(base: dict, over: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "grids":
            out[k] = _merge(out[k], v, f"{where}{k}.")
        else:
            out[k] = copy.deepcopy(v)
    return out


def effective_config(user: dict | None = None, seed: int | None = None) -> dict:
    """Defaults merged with ``user`` and ``seed``, validated against the schema."""
    user = dict(user or {})
    if seed is not None:
        user["seed"] = seed
    cfg = _merge(default_config(), user)
    if "seed" not in cfg:
        raise ValidationError("a master seed is required (config key 'seed' or --seed)")
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        path = ".".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ValidationError(f"config error at {path}: {exc.message}") from None
    _check_semantics(cfg)
    return cfg


def _check_semantics(cfg: dict) -> None:
    try:
        phantom_spec(cfg)
        experiment_config(cfg)
        arch = DlrArchSpec(**{**cfg["dlr"]["arch"], "input_dims": tuple(cfg["dlr"]["arch"]["input_dims"])})
        TrainConfig(**cfg["dlr"]["train"])
    except (ValueError, TypeError) as exc:
        raise ValidationError(f"config error: {exc}") from None
    pp = cfg["preprocess"]
    if pp["lo_pct"] >= pp["hi_pct"]:
        raise ValidationError("config error: preprocess.lo_pct must be below hi_pct")
    if any(d % 2 for d in pp["patch_dims"]):
        raise ValidationError("config error: preprocess.patch_dims must be even (wavelet level)")
    n = cfg["phantom"]["n"]
    e = cfg["experiment"]
    if e["n_train"] + e["n_valid"] != n:
        raise ValidationError(f"config error: experiment.n_train + n_valid = "
                              f"{e['n_train'] + e['n_valid']}, cohort size phantom.n = {n}")
    d = cfg["dlr"]
    if d["n_train"] + d["n_valid"] != n:
        raise ValidationError(f"config error: dlr.n_train + n_valid = "
                              f"{d['n_train'] + d['n_valid']}, cohort size phantom.n = {n}")
    if list(arch.input_dims) != list(pp["patch_dims"]):
        raise ValidationError(f"config error: dlr.arch.input_dims {list(arch.input_dims)} differ "
                              f"from preprocess.patch_dims {pp['patch_dims']}")
    if d["repeat"] >= d["n_repeats"]:
        raise ValidationError("config error: dlr.repeat must be below dlr.n_repeats")


def phantom_spec(cfg: dict) -> PhantomSpec:
    return PhantomSpec.from_dict({**cfg["phantom"], "seed": cfg["seed"]})


def experiment_config(cfg: dict) -> ExperimentConfig:
    return ExperimentConfig(**{**cfg["experiment"], "seed": cfg["seed"]})


def canonical(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def config_hash(cfg: dict, sections=None) -> str:
    part = cfg if sections is None else {"seed": cfg["seed"], **{s: cfg[s] for s in sections}}
    return hashlib.sha256(canonical(part)).hexdigest()


# ----------------------------------------------------------- run manifests

def file_digest(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def tree_digest(paths, root: Path) -> str:
    h = hashlib.sha256()
    for p in sorted(paths, key=lambda q: str(q.relative_to(root))):
        h.update(str(p.relative_to(root)).encode() + b"\0" + file_digest(p).encode() + b"\n")
    return h.hexdigest()


def stage_outputs(stage_dir: Path) -> list[Path]:
    return sorted(p for p in stage_dir.rglob("*")
                  if p.is_file() and p.name not in (MANIFEST, EFFECTIVE, INCOMPLETE))


class Stage:
    """Bookkeeping for one subcommand run: inputs, outputs, manifest, skip logic."""

    def __init__(self, name: str, cfg: dict, out: Path, threads: int, force: bool):
        self.name, self.cfg, self.out, self.threads, self.force = name, cfg, out, threads, force
        self.dir = out / STAGE_DIRS[name]
        self.inputs: dict[str, str] = {}
        self.t0 = time.time()
        self.timings: dict[str, float] = {}

    def upstream(self, stage: str) -> Path:
        """Directory of a prerequisite stage, checked for completeness."""
        d = self.out / STAGE_DIRS[stage]
        if (d / INCOMPLETE).exists():
            raise ValidationError(f"stage '{stage}' in {d} did not finish; rerun `petrad {stage}`")
        if not (d / MANIFEST).exists():
            raise ValidationError(f"missing input {d}: run `petrad {stage}` first")
        man = json.loads((d / MANIFEST).read_text())
        self.inputs[stage] = man["outputs_digest"]
        return d

    def key(self) -> str:
        return hashlib.sha256(canonical({
            "stage": self.name, "version": __version__,
            "config": config_hash(self.cfg, STAGE_SECTIONS[self.name]),
            "inputs": self.inputs})).hexdigest()

    def up_to_date(self) -> bool:
        if self.force or not (self.dir / MANIFEST).exists() or (self.dir / INCOMPLETE).exists():
            return False
        man = json.loads((self.dir / MANIFEST).read_text())
        if man.get("key") != self.key():
            return False
        return tree_digest(stage_outputs(self.dir), self.dir) == man.get("outputs_digest")

    def begin(self) -> None:
        self.dir.mkdir(parents=True, exist_ok=True)
        (self.dir / INCOMPLETE).write_text(self.name + "\n")
        (self.dir / MANIFEST).unlink(missing_ok=True)
        for p in stage_outputs(self.dir):
            p.unlink()

    def finish(self) -> None:
        outputs = stage_outputs(self.dir)
        with open(self.dir / EFFECTIVE, "w") as fh:
            json.dump(self.cfg, fh, indent=1, sort_keys=True)
            fh.write("\n")
        man = {
            "stage": self.name, "petrad_version": __version__, "format": 1,
            "seed": self.cfg["seed"], "config_hash": config_hash(self.cfg),
            "stage_config_hash": config_hash(self.cfg, STAGE_SECTIONS[self.name]),
            "inputs": self.inputs, "key": self.key(),
            "outputs": {str(p.relative_to(self.dir)): file_digest(p) for p in outputs},
            "outputs_digest": tree_digest(outputs, self.dir),
            "threads": self.threads,
            "timings": {**self.timings, "total_s": round(time.time() - self.t0, 3)},
        }
        with open(self.dir / MANIFEST, "w") as fh:
            json.dump(man, fh, indent=1, sort_keys=True)
            fh.write("\n")
        (self.dir / INCOMPLETE).unlink()


# --------------------------------------------------------------- stage work

def run_phantom(st: Stage) -> None:
    from .phantom import iter_cohort, write_cohort
    spec = phantom_spec(st.cfg)
    write_cohort(iter_cohort(spec), st.dir)


def _preprocess_one(args):
    from .imaging import preprocess_study, save_preprocessed
    from .phantom import load_study
    row, cohort_dir, out_path, pp = args
    rec = load_study(row, cohort_dir)
    study = preprocess_study(rec, tuple(pp["patch_dims"]), pp["lo_pct"], pp["hi_pct"],
                             pp["norm_mode"])
    save_preprocessed(study, out_path)
    return row["study_id"]


def _pool_map(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with cf.ProcessPoolExecutor(min(threads, len(items)),
                                mp_context=mp.get_context("spawn")) as ex:
        return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * threads))))


def run_preprocess(st: Stage) -> None:
    from .phantom import read_manifest
    cohort = st.upstream("phantom")
    rows = read_manifest(cohort / "manifest.csv")
    items = [(r, cohort, st.dir / f"{r['study_id']}.arc", st.cfg["preprocess"]) for r in rows]
    _pool_map(_preprocess_one, items, st.threads)
    with open(st.dir / "index.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["study_id", "archive", "label", "tnm"])
        for r in rows:
            w.writerow([r["study_id"], f"{r['study_id']}.arc", r["label"],
                        1 if r["tnm"] == "IVa" else 0])


def _read_index(pre_dir: Path) -> list[dict]:
    with open(pre_dir / "index.csv", newline="") as fh:
        return list(csv.DictReader(fh))


def load_preprocessed_dir(pre_dir: Path):
    from .imaging import load_preprocessed
    return [load_preprocessed(pre_dir / r["archive"]) for r in _read_index(pre_dir)]


def _extract_one(args):
    from .features.extract import extract_all
    from .imaging import load_preprocessed
    path, fcfg = args
    return extract_all(load_preprocessed(path), ExtractionConfig(**fcfg)).values


def run_extract(st: Stage) -> None:
    from .features.extract import write_feature_csv
    pre = st.upstream("preprocess")
    index = _read_index(pre)
    vals = _pool_map(_extract_one, [(pre / r["archive"], st.cfg["features"]) for r in index],
                     st.threads)
    write_feature_csv(st.dir / "features.csv", [r["study_id"] for r in index], vals,
                      [int(r["label"]) for r in index], [int(r["tnm"]) for r in index])


def run_cr_grid_stage(st: Stage) -> None:
    from .features.extract import read_feature_csv
    from .harness import emit_report, run_cr_grid
    feat = st.out / STAGE_DIRS["extract"] / "features.csv"
    if not feat.exists():
        raise ValidationError(f"missing feature CSV {feat}: run `petrad extract` first")
    st.upstream("extract")
    fm = read_feature_csv(feat)
    cfg = experiment_config(st.cfg)
    if cfg.n_train + cfg.n_valid != len(fm.labels):
        raise ValidationError(f"experiment.n_train + n_valid = {cfg.n_train + cfg.n_valid} but "
                              f"{feat} holds {len(fm.labels)} studies")
    report = run_cr_grid(fm.X, fm.labels, fm.tnm, cfg, threads=st.threads, progress=True)
    emit_report(report, st.dir, svg=st.cfg["report"]["svg"])


def _dlr_objects(cfg: dict):
    d = cfg["dlr"]
    arch = DlrArchSpec(**{**d["arch"], "input_dims": tuple(d["arch"]["input_dims"])})
    train_cfg = TrainConfig(**d["train"], seed=cfg["seed"])
    return arch, train_cfg


def _dlr_studies(st: Stage):
    pre = st.upstream("preprocess")
    studies = load_preprocessed_dir(pre)
    d = st.cfg["dlr"]
    if d["n_train"] + d["n_valid"] != len(studies):
        raise ValidationError(f"dlr.n_train + n_valid = {d['n_train'] + d['n_valid']} but "
                              f"{pre} holds {len(studies)} studies")
    return studies


def run_dlr_train(st: Stage) -> None:
    from . import rng as rngmod
    from .dlr import predict, train, write_loss_curve
    from .harness import evaluate_scores
    from .phantom import split_indices
    studies = _dlr_studies(st)
    arch, tcfg = _dlr_objects(st.cfg)
    d = st.cfg["dlr"]
    tr, va = split_indices(len(studies), d["n_train"], d["n_valid"], d["repeat"], st.cfg["seed"])
    tcfg = TrainConfig(**{**asdict(tcfg),
                          "seed": rngmod.child_seed(st.cfg["seed"], "dlr", d["repeat"], arch.variant)})
    model = train([studies[i] for i in tr], arch, tcfg, progress=True)
    model.network.save(st.dir / "model.arc", meta={"variant": arch.variant,
                                                   "best_epoch": model.best_epoch,
                                                   "repeat": d["repeat"]})
    write_loss_curve(model, st.dir / "loss_curve.csv")
    valid = [studies[i] for i in va]
    prob = predict(model, valid)
    y = np.array([s.label for s in valid])
    with open(st.dir / "predictions.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["study_id", "probability", "label"])
        for s, p in zip(valid, prob):
            w.writerow([s.study_id, repr(float(p)), s.label])
    m = evaluate_scores(prob, (prob >= 0.5).astype(np.int64), y)
    with open(st.dir / "metrics.json", "w") as fh:
        json.dump({k: float(v) for k, v in m.items()}, fh, indent=1, sort_keys=True)
        fh.write("\n")


def run_dlr_eval(st: Stage) -> None:
    from .dlr import evaluate_variants, write_variant_table
    studies = _dlr_studies(st)
    arch, tcfg = _dlr_objects(st.cfg)
    d = st.cfg["dlr"]
    report = evaluate_variants(studies, d["n_train"], d["n_valid"], d["n_repeats"],
                               tuple(d["variants"]), arch, tcfg, st.cfg["seed"],
                               threads=st.threads, progress=True)
    write_variant_table(report, st.dir / "variants.csv")
    with open(st.dir / "report.json", "w") as fh:
        json.dump(report.to_json(), fh, indent=1, sort_keys=True)
        fh.write("\n")


def run_report(st: Stage) -> None:
    from .harness import EvaluationReport, emit_report, top_combinations
    src = st.upstream("cr-grid")
    data = json.loads((src / "report.json").read_text())
    roc = {}
    for p in sorted(src.glob("roc_*.csv")):
        with open(p, newline="") as fh:
            rows = list(csv.DictReader(fh))
        roc[p.stem[4:]] = [(int(r["repeat"]), float(r["threshold"]), float(r["fpr"]),
                            float(r["tpr"])) for r in rows]
    report = EvaluationReport(data["config"], data["rows"], data["aggregate"], roc)
    emit_report(report, st.dir, svg=st.cfg["report"]["svg"])
    lines = ["selector,classifier"] + [f"{s},{c}" for s, c in top_combinations(report)]
    dlr_dir = st.out / STAGE_DIRS["dlr-eval"]
    if "dlr-eval" in st.inputs:
        (st.dir / "dlr_variants.csv").write_bytes((dlr_dir / "variants.csv").read_bytes())
    (st.dir / "top_combinations.csv").write_text("\n".join(lines) + "\n")


RUNNERS = {"phantom": run_phantom, "preprocess": run_preprocess, "extract": run_extract,
           "cr-grid": run_cr_grid_stage, "dlr-train": run_dlr_train, "dlr-eval": run_dlr_eval,
           "report": run_report}


# --------------------------------------------------------------- argparse

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config file (partial; defaults fill the rest)")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--threads", type=int, default=1, help="worker processes (default 1)")
    common.add_argument("--out", type=Path, default=Path("petrad-run"),
                        help="workspace directory holding one subdirectory per stage")
    common.add_argument("--force", action="store_true", help="rerun even if outputs are current")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="petrad", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"petrad {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    ph = sub.add_parser("phantom", help="synthetic cohorts")
    phs = ph.add_subparsers(dest="action", required=True)
    phs.add_parser("gen", parents=[common], help="generate a phantom cohort")
    helps = {"preprocess": "SUV, resampling, masking, cropping, normalisation",
             "extract": "handcrafted feature CSV", "cr-grid": "selector x classifier grid",
             "dlr-train": "train one CNN variant", "dlr-eval": "compare CNN variants over repeats",
             "report": "tables and figures from the grid report"}
    for name, h in helps.items():
        sub.add_parser(name, parents=[common], help=h)
    conf = sub.add_parser("config", help="print the effective configuration")
    for a in ("--config", "--seed"):
        conf.add_argument(a, type=Path if a == "--config" else int)
    return p


def _load_user_config(path: Path | None) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ValidationError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ValidationError(f"config file {path} must hold a JSON object")
    return data


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", False) else logging.INFO,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s", stream=sys.stderr)
    stage = "phantom" if args.command == "phantom" else args.command
    try:
        cfg = effective_config(_load_user_config(args.config), args.seed)
        if stage == "config":
            sys.stdout.write(json.dumps(cfg, indent=1, sort_keys=True) + "\n")
            return EXIT_OK
        if args.threads < 1:
            raise ValidationError("--threads must be at least 1")
        st = Stage(stage, cfg, args.out, args.threads, args.force)
        # resolve prerequisites before deciding whether anything changed
        for dep in {"preprocess": ["phantom"], "extract": ["preprocess"], "cr-grid": ["extract"],
                    "dlr-train": ["preprocess"], "dlr-eval": ["preprocess"],
                    "report": ["cr-grid"]}.get(stage, []):
            if dep == "extract" and not (args.out / STAGE_DIRS[dep] / "features.csv").exists():
                raise ValidationError(f"missing feature CSV {args.out / STAGE_DIRS[dep] / 'features.csv'}: "
                                      f"run `petrad extract` first")
            st.upstream(dep)
        if stage == "report" and (args.out / STAGE_DIRS["dlr-eval"] / MANIFEST).exists():
            st.upstream("dlr-eval")
        if st.up_to_date():
            log.info("%s: outputs in %s are current; nothing to do (use --force)", stage, st.dir)
            return EXIT_OK
        st.begin()
        log.info("%s: writing to %s", stage, st.dir)
        RUNNERS[stage](st)
        st.finish()
        log.info("%s: done in %.1fs", stage, time.time() - st.t0)
        return EXIT_OK
    except ValidationError as exc:
        log.error("%s", exc)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - reported with exit code 2
        log.error("%s failed: %s: %s", stage, type(exc).__name__, exc)
        log.debug("traceback", exc_info=True)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
