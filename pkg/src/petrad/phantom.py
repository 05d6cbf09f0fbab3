"""Synthetic PET/CT cohorts with known generative structure.

Each study gets a latent class. The class drives the PET uptake pattern
(peak SUV, texture coarseness and a cold necrotic core) and, more weakly, CT
heterogeneity. The observed label is the class flipped with probability
``label_noise``; the TNM stage copies the label and is flipped with
probability ``(1 - tnm_signal_strength) / 2``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import rng as rngmod
from .imaging import StudyRecord, Volume3D, read_volume, write_volume

INJECTED_MBQ_PER_KG = 7.4


@dataclass(frozen=True)
class ClassParams:
    suv_peak_mean: float
    suv_peak_sd: float
    texture_corr_mm: float
    texture_amp: float
    necrosis_mean: float
    necrosis_sd: float
    ct_hu_mean: float
    ct_hu_sd: float


CLASS0 = ClassParams(suv_peak_mean=7.0, suv_peak_sd=1.5, texture_corr_mm=1.5, texture_amp=0.12,
                     necrosis_mean=0.05, necrosis_sd=0.08, ct_hu_mean=45.0, ct_hu_sd=8.0)
CLASS1 = ClassParams(suv_peak_mean=11.0, suv_peak_sd=2.5, texture_corr_mm=3.5, texture_amp=0.30,
                     necrosis_mean=0.50, necrosis_sd=0.12, ct_hu_mean=40.0, ct_hu_sd=12.0)


@dataclass(frozen=True)
class PhantomSpec:
    n: int = 170
    prevalence: float = 0.2824
    radius_mm: tuple[float, float] = (9.0, 18.0)
    class0: ClassParams = CLASS0
    class1: ClassParams = CLASS1
    tnm_signal_strength: float = 0.5
    label_noise: float = 0.0
    seed: int = 0
    grid: tuple[int, int, int] = (64, 64, 40)
    spacing: tuple[float, float, float] = (1.5, 1.5, 2.0)
    surface_noise: float = 0.12

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("cohort size must be at least 2")
        if not 0.0 < self.prevalence < 1.0:
            raise ValueError("prevalence must lie in (0, 1)")
        if not 0.0 <= self.label_noise < 0.5:
            raise ValueError("label_noise must lie in [0, 0.5)")
        if not 0.0 <= self.tnm_signal_strength <= 1.0:
            raise ValueError("tnm_signal_strength must lie in [0, 1]")
        lo, hi = self.radius_mm
        if not 0 < lo <= hi:
            raise ValueError("radius range must be positive and ordered")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PhantomSpec":
        d = dict(d)
        for key in ("class0", "class1"):
            if key in d and isinstance(d[key], dict):
                d[key] = ClassParams(**d[key])
        for key in ("radius_mm", "grid", "spacing"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


def desk_spec(**overrides) -> PhantomSpec:
    """Smaller grid and tumours that fit 48x48x32 patches."""
    base = dict(grid=(40, 40, 24), spacing=(1.5, 1.5, 2.0), radius_mm=(6.0, 11.0))
    base.update(overrides)
    return PhantomSpec(**base)


def class_assignment(spec: PhantomSpec) -> np.ndarray:
    n_pos = int(math.floor(spec.n * spec.prevalence + 0.5))
    n_pos = min(max(n_pos, 1), spec.n - 1)
    order = rngmod.stream(spec.seed, "phantom-class").permutation(spec.n)
    cls = np.zeros(spec.n, dtype=np.int64)
    cls[order[:n_pos]] = 1
    return cls


def _smooth_field(rng: np.random.Generator, shape, corr_vox) -> np.ndarray:
    f = ndimage.gaussian_filter(rng.standard_normal(shape), corr_vox, mode="wrap")
    sd = f.std()
    return f / sd if sd > 0 else f


def _largest_component(m: np.ndarray) -> np.ndarray:
    lab, n = ndimage.label(m, structure=np.ones((3, 3, 3), dtype=bool))
    if n <= 1:
        return m
    sizes = np.bincount(lab.ravel())
    sizes[0] = 0
    return lab == int(np.argmax(sizes))


def generate_study(spec: PhantomSpec, index: int, cls: int) -> StudyRecord:
    params = spec.class1 if cls == 1 else spec.class0
    g = lambda purpose: rngmod.stream(spec.seed, index, purpose)
    shape = spec.grid
    sp = np.asarray(spec.spacing, dtype=np.float64)

    geo = g("geometry")
    semi = geo.uniform(*spec.radius_mm, size=3)
    angle = geo.uniform(0.0, math.pi)
    extent = np.asarray(shape) * sp
    jitter = geo.uniform(-0.08, 0.08, size=3) * extent
    centre = extent / 2.0 + jitter
    coords = [np.arange(n) * s for n, s in zip(shape, sp)]
    X, Y, Z = np.meshgrid(*coords, indexing="ij")
    dx, dy, dz = X - centre[0], Y - centre[1], Z - centre[2]
    ca, sa = math.cos(angle), math.sin(angle)
    u, v = ca * dx + sa * dy, -sa * dx + ca * dy
    rho = np.sqrt((u / semi[0]) ** 2 + (v / semi[1]) ** 2 + (dz / semi[2]) ** 2)
    corr_geo = 3.0 / sp
    rough = _smooth_field(geo, shape, corr_geo)
    mask = rho < 1.0 + spec.surface_noise * rough
    mask = ndimage.binary_fill_holes(_largest_component(mask))
    if not mask.any():
        mask[tuple(np.round(centre / sp).astype(int))] = True

    pet_rng = g("pet")
    peak = max(pet_rng.normal(params.suv_peak_mean, params.suv_peak_sd), 2.5)
    tex = _smooth_field(pet_rng, shape, params.texture_corr_mm / sp)
    necrosis = float(np.clip(pet_rng.normal(params.necrosis_mean, params.necrosis_sd), 0.0, 0.8))
    core = 1.0 - 0.85 / (1.0 + np.exp((rho - necrosis) / 0.06)) if necrosis > 0 else 1.0
    uptake = peak * (0.75 + params.texture_amp * tex) * core * (1.0 - 0.25 * np.clip(rho, 0, 1) ** 2)
    uptake = np.clip(uptake, 0.3, None)
    bg = 1.0 + 0.15 * _smooth_field(pet_rng, shape, 2.0 / sp)
    suv = np.where(mask, uptake, np.clip(bg, 0.2, None))
    suv = ndimage.gaussian_filter(suv, 1.0 / sp) + 0.05 * pet_rng.standard_normal(shape)
    suv = np.clip(suv, 0.0, None)

    ct_rng = g("ct")
    ct_tex = _smooth_field(ct_rng, shape, 1.5 / sp)
    ct_tumour = params.ct_hu_mean + params.ct_hu_sd * ct_tex
    ct_bg = 30.0 + 20.0 * _smooth_field(ct_rng, shape, 4.0 / sp)
    ct = np.where(mask, ct_tumour, ct_bg) + 5.0 * ct_rng.standard_normal(shape)

    clin = g("clinical")
    mass = float(np.clip(clin.normal(62.0, 10.0), 40.0, 100.0))
    dose = float(INJECTED_MBQ_PER_KG * mass * clin.uniform(0.95, 1.05))
    flip = clin.random() < spec.label_noise
    label = int(cls) ^ int(flip)
    tnm_flip = clin.random() < (1.0 - spec.tnm_signal_strength) / 2.0
    tnm = label ^ int(tnm_flip)

    activity = suv * dose / mass  # kBq/mL from SUV
    origin = (0.0, 0.0, 0.0)
    return StudyRecord(
        study_id=f"P{index:04d}",
        pet=Volume3D(activity, spec.spacing, origin, "PET"),
        ct=Volume3D(ct, spec.spacing, origin, "CT"),
        mask=Volume3D(mask.astype(np.uint8), spec.spacing, origin, "MASK"),
        tnm_stage="IVa" if tnm else "III",
        body_mass=round(mass, 3),
        injected_dose=round(dose, 3),
        label=label,
        meta={"class": int(cls), "suv_max": float(suv[mask].max()), "necrosis": necrosis},
    )


def iter_cohort(spec: PhantomSpec):
    cls = class_assignment(spec)
    for i in range(spec.n):
        yield generate_study(spec, i, int(cls[i]))


def generate_cohort(spec: PhantomSpec) -> list[StudyRecord]:
    return list(iter_cohort(spec))


def cohort_split(cohort, n_train: int, n_valid: int, repeat_index: int, seed: int):
    """Random disjoint train/validation partition, re-drawn per repeat."""
    n = len(cohort)
    if n_train + n_valid != n or n_train < 0 or n_valid < 0:
        raise ValueError(f"split sizes {n_train}+{n_valid} do not match cohort size {n}")
    perm = rngmod.stream(seed, "cohort-split", repeat_index).permutation(n)
    tr, va = np.sort(perm[:n_train]), np.sort(perm[n_train:])
    if isinstance(cohort, np.ndarray):
        return cohort[tr], cohort[va]
    return [cohort[i] for i in tr], [cohort[i] for i in va]


def split_indices(n: int, n_train: int, n_valid: int, repeat_index: int, seed: int):
    return cohort_split(np.arange(n), n_train, n_valid, repeat_index, seed)


# ----------------------------------------------------------------- manifest

MANIFEST_FIELDS = ["study_id", "pet", "ct", "mask", "body_mass", "injected_dose", "tnm", "label"]


def write_cohort(records, out_dir) -> Path:
    """Write volume files and ``manifest.csv`` (paths relative to ``out_dir``)."""
    out = Path(out_dir)
    (out / "volumes").mkdir(parents=True, exist_ok=True)
    rows = []
    for r in records:
        paths = {}
        for kind in ("pet", "ct", "mask"):
            rel = f"volumes/{r.study_id}_{kind}.vol"
            write_volume(getattr(r, kind), out / rel)
            paths[kind] = rel
        rows.append({"study_id": r.study_id, **paths, "body_mass": repr(r.body_mass),
                     "injected_dose": repr(r.injected_dose), "tnm": r.tnm_stage,
                     "label": str(r.label)})
    path = out / "manifest.csv"
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=MANIFEST_FIELDS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return path


def read_manifest(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    missing = set(MANIFEST_FIELDS) - set(rows[0] if rows else MANIFEST_FIELDS)
    if missing:
        raise ValueError(f"{path}: manifest lacks columns {sorted(missing)}")
    return rows


def load_study(row: dict, base_dir) -> StudyRecord:
    base = Path(base_dir)
    return StudyRecord(
        study_id=row["study_id"],
        pet=read_volume(base / row["pet"]),
        ct=read_volume(base / row["ct"]),
        mask=read_volume(base / row["mask"]),
        tnm_stage=row["tnm"],
        body_mass=float(row["body_mass"]),
        injected_dose=float(row["injected_dose"]),
        label=int(row["label"]),
    )
