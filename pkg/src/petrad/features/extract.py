"""Assembly of the 1456-long handcrafted feature vector.

Layout: for modality in (pet, ct), for setting in (orig, wLLL .. wHHH):
19 first-order + 24 GLCM + 16 GLRLM + 16 GLSZM + 5 NGTDM = 80 values; then 16
shape descriptors of the tumour mask. Names follow
``<modality>_<setting>_<family>_<feature>`` and ``shape_<feature>``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ..imaging import Patch, PreprocessedStudy
from .discretize import DiscretizationSpec, discretize
from .firstorder import FOS_NAMES, fos_features
from .shape import SHAPE_NAMES, shape_features
from .texture import (GLCM_NAMES, GLRLM_NAMES, GLSZM_NAMES, NGTDM_NAMES, glcm_features,
                      glrlm_features, glszm_features, ngtdm_features)
from .wavelet import SUBBANDS, decimate_mask, wavelet_decompose

MODALITIES = ("pet", "ct")
SETTINGS = ("orig",) + tuple("w" + b for b in SUBBANDS)
FAMILIES = (("fos", FOS_NAMES), ("glcm", GLCM_NAMES), ("glrlm", GLRLM_NAMES),
            ("glszm", GLSZM_NAMES), ("ngtdm", NGTDM_NAMES))
N_FEATURES = len(MODALITIES) * len(SETTINGS) * sum(len(n) for _, n in FAMILIES) + len(SHAPE_NAMES)


@dataclass(frozen=True)
class ExtractionConfig:
    bin_count: int = 64
    wavelet: str = "coif1"


@dataclass
class FeatureVector:
    names: tuple[str, ...]
    values: np.ndarray

    def __len__(self):
        return len(self.names)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.values.tolist()))


def feature_names() -> tuple[str, ...]:
    names = []
    for mod in MODALITIES:
        for setting in SETTINGS:
            for fam, fnames in FAMILIES:
                names.extend(f"{mod}_{setting}_{fam}_{f}" for f in fnames)
    names.extend(f"shape_{f}" for f in SHAPE_NAMES)
    return tuple(names)


def setting_features(values: np.ndarray, roi: np.ndarray, cfg: ExtractionConfig,
                     voxel_volume: float = 1.0) -> list[float]:
    glv = discretize(values, roi, DiscretizationSpec(cfg.bin_count))
    out = list(fos_features(values, roi, glv, voxel_volume).values())
    out += glcm_features(glv).values()
    out += glrlm_features(glv).values()
    out += glszm_features(glv).values()
    out += ngtdm_features(glv).values()
    return out


def patch_features(patch: Patch, cfg: ExtractionConfig) -> list[float]:
    out = setting_features(patch.voxels, patch.roi, cfg)
    bands = wavelet_decompose(patch.voxels, cfg.wavelet)
    sub_roi = decimate_mask(patch.roi)
    for b in SUBBANDS:
        out += setting_features(bands[b], sub_roi, cfg, voxel_volume=8.0)
    return out


def extract_all(study: PreprocessedStudy, config: ExtractionConfig | None = None) -> FeatureVector:
    cfg = config or ExtractionConfig()
    vals = patch_features(study.pet, cfg) + patch_features(study.ct, cfg)
    vals += shape_features(study.roi).values()
    arr = np.asarray(vals, dtype=np.float64)
    if arr.size != N_FEATURES:
        raise AssertionError(f"feature count {arr.size} != {N_FEATURES}")
    if not np.isfinite(arr).all():
        bad = [n for n, v in zip(feature_names(), arr) if not np.isfinite(v)]
        raise FloatingPointError(f"{study.study_id}: non-finite features {bad[:5]}")
    return FeatureVector(feature_names(), arr)


# ---------------------------------------------------------------- CSV I/O

@dataclass
class FeatureMatrix:
    study_ids: list[str]
    names: tuple[str, ...]
    X: np.ndarray
    labels: np.ndarray
    tnm: np.ndarray


def write_feature_csv(path, study_ids, vectors, labels, tnm) -> None:
    names = feature_names()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["study_id", *names, "label", "tnm"])
        for sid, fv, y, t in zip(study_ids, vectors, labels, tnm):
            values = fv.values if isinstance(fv, FeatureVector) else np.asarray(fv)
            w.writerow([sid, *(repr(float(v)) for v in values), int(y), int(t)])


def read_feature_csv(path) -> FeatureMatrix:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    if header[0] != "study_id" or header[-2:] != ["label", "tnm"]:
        raise ValueError(f"{path}: unexpected feature CSV header")
    names = tuple(header[1:-2])
    body = rows[1:]
    X = np.array([[float(v) for v in r[1:-2]] for r in body], dtype=np.float64)
    return FeatureMatrix([r[0] for r in body], names, X.reshape(len(body), len(names)),
                         np.array([int(r[-2]) for r in body]), np.array([int(r[-1]) for r in body]))
