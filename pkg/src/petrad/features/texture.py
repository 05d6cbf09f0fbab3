"""Grey-level texture matrices (GLCM, GLRLM, GLSZM, NGTDM) and their features.

All matrices use 3D neighbourhoods: the 13 unique unit offsets for GLCM and
GLRLM (features averaged over directions), 26-connectivity for size zones and
the 26-neighbourhood for NGTDM. Entropies are base 2 with 0 log 0 = 0.
"""
from __future__ import annotations

import itertools

import numpy as np
from scipy import ndimage

from .discretize import GreyLevelVolume

DIRECTIONS: tuple[tuple[int, int, int], ...] = tuple(
    d for d in itertools.product((-1, 0, 1), repeat=3)
    if d > (0, 0, 0) and any(d))
# the 26 full-neighbourhood offsets
NEIGHBOURS = tuple(d for d in itertools.product((-1, 0, 1), repeat=3) if any(d))

GLCM_NAMES = (
    "Autocorrelation", "JointAverage", "ClusterProminence", "ClusterShade", "ClusterTendency",
    "Contrast", "Correlation", "DifferenceAverage", "DifferenceEntropy", "DifferenceVariance",
    "JointEnergy", "JointEntropy", "Imc1", "Imc2", "Idm", "Idmn", "Id", "Idn",
    "InverseVariance", "MaximumProbability", "SumAverage", "SumEntropy", "SumSquares", "MCC",
)
GLRLM_NAMES = (
    "ShortRunEmphasis", "LongRunEmphasis", "GrayLevelNonUniformity",
    "GrayLevelNonUniformityNormalized", "RunLengthNonUniformity",
    "RunLengthNonUniformityNormalized", "RunPercentage", "GrayLevelVariance", "RunVariance",
    "RunEntropy", "LowGrayLevelRunEmphasis", "HighGrayLevelRunEmphasis",
    "ShortRunLowGrayLevelEmphasis", "ShortRunHighGrayLevelEmphasis",
    "LongRunLowGrayLevelEmphasis", "LongRunHighGrayLevelEmphasis",
)
GLSZM_NAMES = (
    "SmallAreaEmphasis", "LargeAreaEmphasis", "GrayLevelNonUniformity",
    "GrayLevelNonUniformityNormalized", "SizeZoneNonUniformity",
    "SizeZoneNonUniformityNormalized", "ZonePercentage", "GrayLevelVariance", "ZoneVariance",
    "ZoneEntropy", "LowGrayLevelZoneEmphasis", "HighGrayLevelZoneEmphasis",
    "SmallAreaLowGrayLevelEmphasis", "SmallAreaHighGrayLevelEmphasis",
    "LargeAreaLowGrayLevelEmphasis", "LargeAreaHighGrayLevelEmphasis",
)
NGTDM_NAMES = ("Coarseness", "Contrast", "Busyness", "Complexity", "Strength")


def _entropy(p: np.ndarray) -> float:
    q = p[p > 0]
    return float(-(q * np.log2(q)).sum())


def _cropped(glv: GreyLevelVolume) -> np.ndarray:
    """Bounding box of the ROI padded by one background voxel on every side."""
    lv = glv.levels
    idx = np.argwhere(lv > 0)
    if idx.size == 0:
        raise ValueError("empty ROI")
    lo, hi = idx.min(axis=0), idx.max(axis=0) + 1
    box = lv[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]]
    return np.pad(box, 1).astype(np.int64)


def _shift_slices(shape, d):
    """Slices selecting voxel v (interior) and its neighbour v + d."""
    src = tuple(slice(1, n - 1) for n in shape)
    dst = tuple(slice(1 + k, n - 1 + k) for n, k in zip(shape, d))
    return src, dst


# --------------------------------------------------------------------- GLCM

def glcm_matrices(glv: GreyLevelVolume) -> np.ndarray:
    """Symmetric co-occurrence counts, shape (13, Ng, Ng)."""
    L = _cropped(glv)
    ng = glv.n_levels
    out = np.zeros((len(DIRECTIONS), ng, ng), dtype=np.float64)
    for k, d in enumerate(DIRECTIONS):
        src, dst = _shift_slices(L.shape, d)
        a, b = L[src].ravel(), L[dst].ravel()
        ok = (a > 0) & (b > 0)
        c = np.bincount((a[ok] - 1) * ng + (b[ok] - 1), minlength=ng * ng).reshape(ng, ng)
        out[k] = c + c.T
    return out


def _mcc(p: np.ndarray, px: np.ndarray) -> float:
    keep = px > 0
    if keep.sum() < 2:
        return 1.0
    pk = p[np.ix_(keep, keep)]
    m = px[keep]
    # symmetric similarity transform of Q = P diag(1/py) P^T diag(1/px)
    s = pk / np.sqrt(np.outer(m, m))
    ev = np.sort(np.linalg.eigvalsh(s @ s))[::-1]
    lam2 = ev[1]
    return float(np.sqrt(lam2)) if lam2 > 1e-12 * ev[0] else 0.0


def glcm_from_matrix(P: np.ndarray) -> np.ndarray:
    """The 24 features of one (count or probability) co-occurrence matrix."""
    ng = P.shape[0]
    p = P / P.sum()
    i = np.arange(1, ng + 1, dtype=np.float64)
    I, J = np.meshgrid(i, i, indexing="ij")
    px, py = p.sum(axis=1), p.sum(axis=0)
    ux, uy = float(px @ i), float(py @ i)
    sx = np.sqrt(float(px @ (i - ux) ** 2))
    sy = np.sqrt(float(py @ (i - uy) ** 2))
    diff = np.abs(I - J).astype(np.int64)
    pdiff = np.bincount(diff.ravel(), weights=p.ravel(), minlength=ng)
    ssum = (I + J).astype(np.int64)
    psum = np.bincount(ssum.ravel(), weights=p.ravel(), minlength=2 * ng + 1)
    k_d = np.arange(ng, dtype=np.float64)
    k_s = np.arange(2 * ng + 1, dtype=np.float64)
    hx, hy, hxy = _entropy(px), _entropy(py), _entropy(p)
    pxy = np.outer(px, py)
    nz = p > 0
    hxy1 = float(-(p[nz] * np.log2(pxy[nz])).sum())
    hxy2 = _entropy(pxy)
    cross = I + J - ux - uy
    da = float(k_d @ pdiff)
    if sx * sy > 0:
        corr = (float((p * I * J).sum()) - ux * uy) / (sx * sy)
    else:
        corr = 1.0
    hmax = max(hx, hy)
    imc1 = (hxy - hxy1) / hmax if hmax > 0 else 0.0
    imc2 = float(np.sqrt(1.0 - np.exp(-2.0 * (hxy2 - hxy)))) if hxy2 > hxy else 0.0
    inv_var = float((pdiff[1:] / k_d[1:] ** 2).sum()) if ng > 1 else 0.0
    return np.array([
        float((p * I * J).sum()),
        ux,
        float((p * cross ** 4).sum()),
        float((p * cross ** 3).sum()),
        float((p * cross ** 2).sum()),
        float((p * (I - J) ** 2).sum()),
        corr,
        da,
        _entropy(pdiff),
        float(((k_d - da) ** 2) @ pdiff),
        float((p ** 2).sum()),
        hxy,
        imc1,
        imc2,
        float((p / (1.0 + (I - J) ** 2)).sum()),
        float((p / (1.0 + (I - J) ** 2 / ng ** 2)).sum()),
        float((p / (1.0 + diff)).sum()),
        float((p / (1.0 + diff / ng)).sum()),
        inv_var,
        float(p.max()),
        float(k_s @ psum),
        _entropy(psum),
        float((p * (I - ux) ** 2).sum()),
        _mcc(p, px),
    ])


def glcm_features(glv: GreyLevelVolume) -> dict[str, float]:
    mats = glcm_matrices(glv)
    rows = [glcm_from_matrix(P) for P in mats if P.sum() > 0]
    if not rows:
        vals = np.zeros(len(GLCM_NAMES))
        vals[GLCM_NAMES.index("Correlation")] = 1.0
        vals[GLCM_NAMES.index("MCC")] = 1.0
    else:
        vals = np.mean(rows, axis=0)
    return dict(zip(GLCM_NAMES, vals.tolist()))


# -------------------------------------------------------------------- GLRLM

def _runs_along(L: np.ndarray, d) -> tuple[np.ndarray, np.ndarray]:
    """Grey level and length of every maximal run along offset ``d``."""
    flat = L.ravel()
    step = int(np.dot(d, (L.shape[1] * L.shape[2], L.shape[2], 1)))
    # padding guarantees v - step and v + step stay inside the buffer for ROI voxels
    roi_idx = np.flatnonzero(flat > 0)
    lv = flat[roi_idx]
    starts = roi_idx[flat[roi_idx - step] != lv]
    levels, lengths = [], []
    pos = starts
    length = 1
    while pos.size:
        cont = flat[pos + step] == flat[pos]
        ended = pos[~cont]
        if ended.size:
            levels.append(flat[ended])
            lengths.append(np.full(ended.size, length, dtype=np.int64))
        pos = pos[cont] + step
        length += 1
    return np.concatenate(levels), np.concatenate(lengths)


def glrlm_matrices(glv: GreyLevelVolume) -> list[np.ndarray]:
    L = _cropped(glv)
    ng = glv.n_levels
    max_len = max(L.shape) - 2
    mats = []
    for d in DIRECTIONS:
        lv, ln = _runs_along(L, d)
        R = np.bincount((lv - 1) * max_len + (ln - 1), minlength=ng * max_len)
        mats.append(R.reshape(ng, max_len).astype(np.float64))
    return mats


def _emphasis_features(M: np.ndarray, n_voxels: int) -> np.ndarray:
    """Shared run/zone statistics; rows are grey levels, columns lengths/sizes."""
    ng, nl = M.shape
    i = np.arange(1, ng + 1, dtype=np.float64)[:, None]
    j = np.arange(1, nl + 1, dtype=np.float64)[None, :]
    nr = M.sum()
    p = M / nr
    pi, pj = M.sum(axis=1), M.sum(axis=0)
    mu_i = float((p * i).sum())
    mu_j = float((p * j).sum())
    return np.array([
        float((p / j ** 2).sum()),
        float((p * j ** 2).sum()),
        float((pi ** 2).sum() / nr),
        float((pi ** 2).sum() / nr ** 2),
        float((pj ** 2).sum() / nr),
        float((pj ** 2).sum() / nr ** 2),
        nr / n_voxels,
        float((p * (i - mu_i) ** 2).sum()),
        float((p * (j - mu_j) ** 2).sum()),
        _entropy(p),
        float((p / i ** 2).sum()),
        float((p * i ** 2).sum()),
        float((p / (i ** 2 * j ** 2)).sum()),
        float((p * i ** 2 / j ** 2).sum()),
        float((p * j ** 2 / i ** 2).sum()),
        float((p * i ** 2 * j ** 2).sum()),
    ])


def glrlm_features(glv: GreyLevelVolume) -> dict[str, float]:
    n_vox = int((glv.levels > 0).sum())
    rows = [_emphasis_features(R, n_vox) for R in glrlm_matrices(glv)]
    return dict(zip(GLRLM_NAMES, np.mean(rows, axis=0).tolist()))


# -------------------------------------------------------------------- GLSZM

_CONN26 = np.ones((3, 3, 3), dtype=bool)


def glszm_matrix(glv: GreyLevelVolume) -> np.ndarray:
    L = _cropped(glv)
    ng = glv.n_levels
    n_vox = int((L > 0).sum())
    Z = np.zeros((ng, n_vox), dtype=np.float64)
    for g in np.unique(L[L > 0]):
        lab, n = ndimage.label(L == g, structure=_CONN26)
        sizes = np.bincount(lab.ravel())[1:]
        Z[g - 1] += np.bincount(sizes, minlength=n_vox + 1)[1:]
    return Z


def glszm_features(glv: GreyLevelVolume) -> dict[str, float]:
    Z = glszm_matrix(glv)
    return dict(zip(GLSZM_NAMES, _emphasis_features(Z, Z.shape[1]).tolist()))


# -------------------------------------------------------------------- NGTDM

def ngtdm_vectors(glv: GreyLevelVolume) -> tuple[np.ndarray, np.ndarray]:
    """Per-level voxel counts n_i and summed absolute tone differences s_i."""
    L = _cropped(glv)
    ng = glv.n_levels
    roi = (L > 0).astype(np.float64)
    Lf = L.astype(np.float64)
    total = np.zeros(L.shape)
    count = np.zeros(L.shape)
    core = tuple(slice(1, n - 1) for n in L.shape)
    for d in NEIGHBOURS:
        _, dst = _shift_slices(L.shape, d)
        total[core] += Lf[dst]
        count[core] += roi[dst]
    valid = (L > 0) & (count > 0)
    lv = L[valid]
    diff = np.abs(lv - total[valid] / count[valid])
    n = np.bincount(lv - 1, minlength=ng).astype(np.float64)
    s = np.bincount(lv - 1, weights=diff, minlength=ng)
    return n, s


def ngtdm_from_vectors(n: np.ndarray, s: np.ndarray) -> np.ndarray:
    nvp = n.sum()
    if nvp == 0:
        return np.zeros(len(NGTDM_NAMES))
    p = n / nvp
    i = np.arange(1, n.size + 1, dtype=np.float64)
    keep = p > 0
    p, s_k, i = p[keep], s[keep], i[keep]
    ngp = p.size
    ps = float(p @ s_k)
    s_tot = float(s_k.sum())
    di = i[:, None] - i[None, :]
    pp = p[:, None] * p[None, :]
    coarse = 1.0 / ps if ps > 0 else 0.0
    if ngp > 1:
        contrast = float((pp * di ** 2).sum()) / (ngp * (ngp - 1)) * s_tot / nvp
    else:
        contrast = 0.0
    bden = float(np.abs((i * p)[:, None] - (i * p)[None, :]).sum())
    busy = ps / bden if bden > 0 else 0.0
    psi = p * s_k
    complexity = float((np.abs(di) * (psi[:, None] + psi[None, :])
                        / (p[:, None] + p[None, :])).sum()) / nvp
    strength = float(((p[:, None] + p[None, :]) * di ** 2).sum()) / s_tot if s_tot > 0 else 0.0
    return np.array([coarse, contrast, busy, complexity, strength])


def ngtdm_features(glv: GreyLevelVolume) -> dict[str, float]:
    return dict(zip(NGTDM_NAMES, ngtdm_from_vectors(*ngtdm_vectors(glv)).tolist()))
