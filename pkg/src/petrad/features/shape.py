"""3D shape descriptors of a binary mask.

Surface area counts exposed voxel faces (no meshing): a single voxel has area
6, a 10-voxel cube 600. Diameters are measured between voxel centres.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.spatial import ConvexHull, QhullError
from scipy.spatial.distance import pdist

SHAPE_NAMES = (
    "VoxelVolume", "SurfaceArea", "SurfaceVolumeRatio", "Sphericity", "Compactness1",
    "Compactness2", "SphericalDisproportion", "Maximum3DDiameter", "Maximum2DDiameterSlice",
    "Maximum2DDiameterColumn", "Maximum2DDiameterRow", "MajorAxisLength", "MinorAxisLength",
    "LeastAxisLength", "Elongation", "Flatness",
)


def face_area(mask: np.ndarray, spacing=(1.0, 1.0, 1.0)) -> float:
    m = np.pad(np.asarray(mask, dtype=bool), 1)
    sx, sy, sz = spacing
    area = 0.0
    for axis, face in ((0, sy * sz), (1, sx * sz), (2, sx * sy)):
        area += face * np.count_nonzero(np.diff(m, axis=axis))
    return area


def _boundary(mask: np.ndarray) -> np.ndarray:
    m = np.pad(mask, 1)
    inner = m.copy()
    for axis in range(3):
        inner[1:-1, 1:-1, 1:-1] &= np.roll(m, 1, axis)[1:-1, 1:-1, 1:-1]
        inner[1:-1, 1:-1, 1:-1] &= np.roll(m, -1, axis)[1:-1, 1:-1, 1:-1]
    return (m & ~inner)[1:-1, 1:-1, 1:-1]


def _max_distance(pts: np.ndarray) -> float:
    if len(pts) < 2:
        return 0.0
    if len(pts) > 64:
        try:
            pts = pts[ConvexHull(pts).vertices]
        except (QhullError, ValueError):
            pass
    return float(pdist(pts).max())


def _max_in_planes(pts: np.ndarray, axis: int) -> float:
    keep = [a for a in range(3) if a != axis]
    best = 0.0
    for v in np.unique(pts[:, axis]):
        sl = pts[pts[:, axis] == v][:, keep]
        if len(sl) > 1:
            if len(sl) > 64:
                try:
                    sl = sl[ConvexHull(sl).vertices]
                except (QhullError, ValueError):
                    pass
            best = max(best, float(pdist(sl).max()))
    return best


def shape_features(mask: np.ndarray, spacing=(1.0, 1.0, 1.0)) -> dict[str, float]:
    m = np.asarray(mask, dtype=bool)
    n = int(m.sum())
    if n == 0:
        raise ValueError("empty mask")
    sp = np.asarray(spacing, dtype=np.float64)
    vol = n * float(np.prod(sp))
    area = face_area(m, spacing)
    coords = np.argwhere(m) * sp
    bpts = np.argwhere(_boundary(m)) * sp
    c = coords - coords.mean(axis=0)
    ev = np.sort(np.clip(np.linalg.eigvalsh(c.T @ c / n), 0.0, None))[::-1]
    major, minor, least = (4.0 * math.sqrt(e) for e in ev)
    elong = math.sqrt(ev[1] / ev[0]) if ev[0] > 0 else 0.0
    flat = math.sqrt(ev[2] / ev[0]) if ev[0] > 0 else 0.0
    return dict(zip(SHAPE_NAMES, [
        vol,
        area,
        area / vol,
        math.pi ** (1 / 3) * (6.0 * vol) ** (2 / 3) / area,
        vol / (math.sqrt(math.pi) * area ** 1.5),
        36.0 * math.pi * vol ** 2 / area ** 3,
        area / (36.0 * math.pi * vol ** 2) ** (1 / 3),
        _max_distance(bpts),
        _max_in_planes(bpts, 2),
        _max_in_planes(bpts, 1),
        _max_in_planes(bpts, 0),
        major,
        minor,
        least,
        elong,
        flat,
    ]))
