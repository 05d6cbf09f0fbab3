"""Volume container, file I/O and the PET/CT preprocessing chain.

Arrays are indexed ``[x, y, z]``. On disk the payload is written x-fastest
(Fortran order) after a one-line JSON header.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .archive import load_archive, save_archive

MODALITIES = ("PET", "PET-SUV", "CT", "MASK")
VOLUME_MAGIC = b"PETRADVOL 1\n"


class VolumeError(ValueError):
    """Malformed or inconsistent volume data."""


class VolumeInvariantError(VolumeError):
    pass


class EmptyMaskError(ValueError):
    pass


class TumorTooLargeError(ValueError):
    pass


@dataclass
class Volume3D:
    voxels: np.ndarray
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    modality: str = "CT"

    def __post_init__(self):
        v = np.asarray(self.voxels)
        if v.ndim != 3 or min(v.shape) < 1:
            raise VolumeInvariantError(f"voxels must be a non-empty 3D array, got shape {v.shape}")
        if self.modality not in MODALITIES:
            raise VolumeInvariantError(f"unknown modality {self.modality!r}")
        sp = tuple(float(s) for s in self.spacing)
        if len(sp) != 3 or not all(math.isfinite(s) and s > 0 for s in sp):
            raise VolumeInvariantError(f"spacing must be positive and finite, got {self.spacing}")
        org = tuple(float(o) for o in self.origin)
        if len(org) != 3:
            raise VolumeInvariantError("origin must have three components")
        if self.modality == "MASK":
            if not np.isin(v, (0, 1)).all():
                raise VolumeInvariantError("MASK volumes may only contain 0 and 1")
            v = v.astype(np.uint8)
        else:
            v = v.astype(np.float32)
        self.voxels, self.spacing, self.origin = v, sp, org

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(n) for n in self.voxels.shape)

    def same_geometry(self, other: "Volume3D", tol: float = 1e-6) -> bool:
        return (self.dims == other.dims
                and np.allclose(self.spacing, other.spacing, rtol=0, atol=tol)
                and np.allclose(self.origin, other.origin, rtol=0, atol=tol))


@dataclass
class Patch:
    """Fixed-size crop around the tumour; ``roi`` marks tumour voxels."""

    voxels: np.ndarray
    roi: np.ndarray
    modality: str
    offset: tuple[int, int, int] = (0, 0, 0)

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(n) for n in self.voxels.shape)


@dataclass
class StudyRecord:
    study_id: str
    pet: Volume3D
    ct: Volume3D
    mask: Volume3D
    tnm_stage: str
    body_mass: float
    injected_dose: float
    label: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.tnm_stage not in ("III", "IVa"):
            raise ValueError(f"tnm_stage must be 'III' or 'IVa', got {self.tnm_stage!r}")
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")

    @property
    def tnm_code(self) -> int:
        return tnm_code(self.tnm_stage)


def tnm_code(stage: str) -> int:
    return {"III": 0, "IVa": 1}[stage]


@dataclass
class PreprocessedStudy:
    study_id: str
    pet: Patch
    ct: Patch
    tnm: int
    label: int

    @property
    def roi(self) -> np.ndarray:
        return self.pet.roi


# ---------------------------------------------------------------- file I/O

def write_volume(vol: Volume3D, path) -> None:
    dtype = "|u1" if vol.modality == "MASK" else "<f4"
    header = {
        "dims": list(vol.dims),
        "spacing": list(vol.spacing),
        "origin": list(vol.origin),
        "modality": vol.modality,
        "dtype": dtype,
        "order": "x-fastest",
    }
    payload = np.asarray(vol.voxels, dtype=np.dtype(dtype)).tobytes(order="F")
    with open(path, "wb") as fh:
        fh.write(VOLUME_MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        fh.write(payload)


def read_volume(path) -> Volume3D:
    data = Path(path).read_bytes()
    if not data.startswith(VOLUME_MAGIC):
        raise VolumeError(f"{path}: missing volume magic line")
    try:
        end = data.index(b"\n", len(VOLUME_MAGIC))
        header = json.loads(data[len(VOLUME_MAGIC):end])
        dims = [int(n) for n in header["dims"]]
        dtype = np.dtype(header["dtype"])
        spacing, origin, modality = header["spacing"], header["origin"], header["modality"]
    except (ValueError, KeyError, TypeError) as exc:
        raise VolumeError(f"{path}: malformed header ({exc})") from exc
    if len(dims) != 3 or min(dims) < 1:
        raise VolumeError(f"{path}: dims must be three positive integers")
    if header.get("order", "x-fastest") != "x-fastest":
        raise VolumeError(f"{path}: unsupported voxel order {header['order']!r}")
    payload = data[end + 1:]
    expected = dims[0] * dims[1] * dims[2] * dtype.itemsize
    if len(payload) != expected:
        raise VolumeError(
            f"{path}: payload holds {len(payload) // dtype.itemsize} values, "
            f"header declares {dims[0] * dims[1] * dims[2]}")
    vox = np.frombuffer(payload, dtype=dtype).reshape(dims, order="F")
    return Volume3D(np.ascontiguousarray(vox), tuple(spacing), tuple(origin), modality)


# ----------------------------------------------------------- preprocessing

def to_suv(pet: Volume3D, body_mass: float, injected_dose: float) -> Volume3D:
    """Body-weight SUV from activity concentration.

    ``body_mass`` in kg, ``injected_dose`` in MBq, voxels in kBq/mL:
    SUV = C[kBq/mL] * mass[g] / dose[kBq].
    """
    if not body_mass > 0 or not injected_dose > 0:
        raise ValueError("body mass and injected dose must be positive")
    factor = (body_mass * 1000.0) / (injected_dose * 1000.0)
    suv = pet.voxels.astype(np.float64) * factor
    return Volume3D(suv, pet.spacing, pet.origin, "PET-SUV")


def _axis_positions(n_in: int, spacing: float) -> tuple[int, np.ndarray]:
    n_out = int(math.ceil(n_in * spacing - 1e-9))
    # output voxel i sits at i mm from the shared origin -> input index i / spacing
    return n_out, np.arange(n_out, dtype=np.float64) / spacing


def _linear_along(a: np.ndarray, axis: int, pos: np.ndarray) -> np.ndarray:
    n = a.shape[axis]
    pos = np.clip(pos, 0.0, n - 1)
    lo = np.floor(pos).astype(np.intp)
    hi = np.minimum(lo + 1, n - 1)
    frac = pos - lo
    shape = [1] * a.ndim
    shape[axis] = -1
    frac = frac.reshape(shape)
    return np.take(a, lo, axis=axis) * (1.0 - frac) + np.take(a, hi, axis=axis) * frac


def _nearest_along(a: np.ndarray, axis: int, pos: np.ndarray) -> np.ndarray:
    n = a.shape[axis]
    idx = np.clip(np.floor(pos + 0.5).astype(np.intp), 0, n - 1)
    return np.take(a, idx, axis=axis)


def resample_isotropic(vol: Volume3D, mode: str = "linear") -> Volume3D:
    """Resample onto a 1 mm isotropic grid sharing the input origin.

    Axis-aligned rescaling is separable, so linear mode interpolates one axis
    at a time (equivalent to trilinear). Samples beyond the last input voxel
    clamp to the edge value.
    """
    if mode not in ("linear", "nearest"):
        raise ValueError(f"unknown interpolation mode {mode!r}")
    a = vol.voxels.astype(np.float64)
    for axis in range(3):
        _, pos = _axis_positions(a.shape[axis], vol.spacing[axis])
        a = (_linear_along if mode == "linear" else _nearest_along)(a, axis, pos)
    if vol.modality == "MASK":
        a = (a >= 0.5).astype(np.uint8) if mode == "linear" else a.astype(np.uint8)
    return Volume3D(a, (1.0, 1.0, 1.0), vol.origin, vol.modality)


def mask_and_crop(vol: Volume3D, mask: Volume3D, patch_dims=(80, 80, 64)) -> Patch:
    """Zero everything outside the mask and crop a patch centred on the tumour.

    The crop centre is the mask centroid rounded half-up per axis and lands on
    voxel ``patch_dims // 2`` of the patch. Regions beyond the volume are
    zero-filled. A tumour that does not fit raises instead of being cut.
    """
    if not vol.same_geometry(mask):
        raise VolumeError("image and mask geometry differ")
    m = mask.voxels.astype(bool)
    idx = np.argwhere(m)
    if idx.size == 0:
        raise EmptyMaskError("mask contains no tumour voxels")
    pd = np.asarray(patch_dims, dtype=np.int64)
    centre = np.floor(idx.mean(axis=0) + 0.5).astype(np.int64)
    start = centre - pd // 2
    lo, hi = idx.min(axis=0), idx.max(axis=0)
    if np.any(lo < start) or np.any(hi >= start + pd):
        extent = hi - lo + 1
        raise TumorTooLargeError(
            f"tumour extent {tuple(extent)} (centred at {tuple(centre)}) does not fit patch {tuple(pd)}")
    prod = np.where(m, vol.voxels.astype(np.float64), 0.0)
    out = np.zeros(tuple(pd), dtype=np.float64)
    roi = np.zeros(tuple(pd), dtype=bool)
    src = [slice(max(s, 0), min(s + p, n)) for s, p, n in zip(start, pd, vol.dims)]
    dst = [slice(sl.start - s, sl.stop - s) for sl, s in zip(src, start)]
    out[tuple(dst)] = prod[tuple(src)]
    roi[tuple(dst)] = m[tuple(src)]
    return Patch(out, roi, vol.modality, tuple(int(s) for s in start))


def clip_normalize(patch: Patch, lo_pct: float = 5.0, hi_pct: float = 95.0,
                   mode: str = "percentile") -> Patch:
    """Map ROI intensities to [0, 1] between a lower and an upper limit.

    ``percentile`` mode uses linearly interpolated percentiles of the ROI
    voxels; ``scaled`` mode uses ``hi_pct% * max`` and ``hi_pct% * min`` of the
    ROI. Background stays exactly 0. A zero-width window maps the ROI to 1.
    """
    roi = patch.roi
    vals = patch.voxels[roi]
    if vals.size == 0:
        raise EmptyMaskError("patch has no ROI voxels")
    if mode == "percentile":
        p_lo, p_hi = np.percentile(vals, [lo_pct, hi_pct])
    elif mode == "scaled":
        frac = hi_pct / 100.0
        p_lo, p_hi = frac * vals.min(), frac * vals.max()
    else:
        raise ValueError(f"unknown normalisation mode {mode!r}")
    out = np.zeros_like(patch.voxels, dtype=np.float64)
    if p_hi > p_lo:
        out[roi] = np.clip((vals - p_lo) / (p_hi - p_lo), 0.0, 1.0)
    else:
        out[roi] = 1.0
    return Patch(out, roi.copy(), patch.modality, patch.offset)


def preprocess_study(record: StudyRecord, patch_dims=(80, 80, 64), lo_pct: float = 5.0,
                     hi_pct: float = 95.0, norm_mode: str = "percentile") -> PreprocessedStudy:
    """SUV conversion, 1 mm resampling, masking, cropping and normalisation."""
    suv = to_suv(record.pet, record.body_mass, record.injected_dose)
    pet = resample_isotropic(suv, "linear")
    ct = resample_isotropic(record.ct, "linear")
    mask = resample_isotropic(record.mask, "nearest")
    patches = []
    for img in (pet, ct):
        p = mask_and_crop(img, mask, patch_dims)
        patches.append(clip_normalize(p, lo_pct, hi_pct, norm_mode))
    return PreprocessedStudy(record.study_id, patches[0], patches[1], record.tnm_code, record.label)


# ------------------------------------------------- preprocessed persistence

def save_preprocessed(study: PreprocessedStudy, path) -> None:
    """Store the patches compactly: the ROI mask plus in-ROI values only.

    Background voxels are exactly zero after masking, so nothing is lost.
    """
    if not np.array_equal(study.pet.roi, study.ct.roi):
        raise VolumeError(f"{study.study_id}: PET and CT patches have different ROIs")
    roi = study.pet.roi
    arrays = {"roi": roi.astype(bool), "pet": study.pet.voxels[roi].astype(np.float64),
              "ct": study.ct.voxels[roi].astype(np.float64)}
    meta = {"study_id": study.study_id, "tnm": int(study.tnm), "label": int(study.label),
            "offset": [int(o) for o in study.pet.offset], "dims": list(study.pet.dims)}
    save_archive(path, arrays, meta)


def load_preprocessed(path) -> PreprocessedStudy:
    arrays, meta = load_archive(path)
    roi = arrays["roi"].astype(bool)
    offset = tuple(meta["offset"])
    patches = {}
    for kind, modality in (("pet", "PET-SUV"), ("ct", "CT")):
        vox = np.zeros(roi.shape, dtype=np.float64)
        vox[roi] = arrays[kind]
        patches[kind] = Patch(vox, roi.copy(), modality, offset)
    return PreprocessedStudy(meta["study_id"], patches["pet"], patches["ct"], int(meta["tnm"]),
                             int(meta["label"]))
