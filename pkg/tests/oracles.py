"""Brute-force reference implementations used only by the tests.

Everything here enumerates voxels, pairs and runs with plain Python loops so
that it shares no code path with the vectorised package implementations.
"""
from __future__ import annotations

import itertools
import math
from collections import deque
from fractions import Fraction

import numpy as np

DIRS13 = [d for d in itertools.product((-1, 0, 1), repeat=3) if d > (0, 0, 0)]
NEIGH26 = [d for d in itertools.product((-1, 0, 1), repeat=3) if d != (0, 0, 0)]


def rel_err(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1.0)


def _inside(shape, v):
    return all(0 <= v[k] < shape[k] for k in range(3))


def _voxels(L):
    return [v for v in itertools.product(*(range(n) for n in L.shape)) if L[v] > 0]


def _log2(x):
    return math.log(x, 2)


def _entropy(ps):
    return -sum(p * _log2(p) for p in ps if p > 0)


# --------------------------------------------------------------------- GLCM

def glcm_counts(L, ng, d):
    P = [[0] * ng for _ in range(ng)]
    for v in _voxels(L):
        u = (v[0] + d[0], v[1] + d[1], v[2] + d[2])
        if _inside(L.shape, u) and L[u] > 0:
            a, b = int(L[v]) - 1, int(L[u]) - 1
            P[a][b] += 1
            P[b][a] += 1
    return P


def glcm_feature_dict(P):
    ng = len(P)
    tot = sum(sum(r) for r in P)
    p = [[P[i][j] / tot for j in range(ng)] for i in range(ng)]
    lv = range(ng)
    px = [sum(p[i][j] for j in lv) for i in lv]
    py = [sum(p[i][j] for i in lv) for j in lv]
    ux = sum((i + 1) * px[i] for i in lv)
    uy = sum((j + 1) * py[j] for j in lv)
    sx = math.sqrt(sum((i + 1 - ux) ** 2 * px[i] for i in lv))
    sy = math.sqrt(sum((j + 1 - uy) ** 2 * py[j] for j in lv))
    pdiff = [0.0] * ng
    psum = [0.0] * (2 * ng + 1)
    for i in lv:
        for j in lv:
            pdiff[abs(i - j)] += p[i][j]
            psum[i + j + 2] += p[i][j]
    f = {}
    f["Autocorrelation"] = sum((i + 1) * (j + 1) * p[i][j] for i in lv for j in lv)
    f["JointAverage"] = ux
    cr = lambda i, j: (i + 1) + (j + 1) - ux - uy
    f["ClusterProminence"] = sum(cr(i, j) ** 4 * p[i][j] for i in lv for j in lv)
    f["ClusterShade"] = sum(cr(i, j) ** 3 * p[i][j] for i in lv for j in lv)
    f["ClusterTendency"] = sum(cr(i, j) ** 2 * p[i][j] for i in lv for j in lv)
    f["Contrast"] = sum((i - j) ** 2 * p[i][j] for i in lv for j in lv)
    f["Correlation"] = ((f["Autocorrelation"] - ux * uy) / (sx * sy)) if sx * sy > 0 else 1.0
    da = sum(k * pdiff[k] for k in range(ng))
    f["DifferenceAverage"] = da
    f["DifferenceEntropy"] = _entropy(pdiff)
    f["DifferenceVariance"] = sum((k - da) ** 2 * pdiff[k] for k in range(ng))
    f["JointEnergy"] = sum(p[i][j] ** 2 for i in lv for j in lv)
    hxy = _entropy([p[i][j] for i in lv for j in lv])
    f["JointEntropy"] = hxy
    hx, hy = _entropy(px), _entropy(py)
    hxy1 = -sum(p[i][j] * _log2(px[i] * py[j]) for i in lv for j in lv if p[i][j] > 0)
    hxy2 = -sum(px[i] * py[j] * _log2(px[i] * py[j]) for i in lv for j in lv
                if px[i] * py[j] > 0)
    f["Imc1"] = (hxy - hxy1) / max(hx, hy) if max(hx, hy) > 0 else 0.0
    f["Imc2"] = math.sqrt(1 - math.exp(-2 * (hxy2 - hxy))) if hxy2 > hxy else 0.0
    f["Idm"] = sum(p[i][j] / (1 + (i - j) ** 2) for i in lv for j in lv)
    f["Idmn"] = sum(p[i][j] / (1 + (i - j) ** 2 / ng ** 2) for i in lv for j in lv)
    f["Id"] = sum(p[i][j] / (1 + abs(i - j)) for i in lv for j in lv)
    f["Idn"] = sum(p[i][j] / (1 + abs(i - j) / ng) for i in lv for j in lv)
    f["InverseVariance"] = sum(pdiff[k] / k ** 2 for k in range(1, ng))
    f["MaximumProbability"] = max(max(r) for r in p)
    f["SumAverage"] = sum(k * psum[k] for k in range(2 * ng + 1))
    f["SumEntropy"] = _entropy(psum)
    f["SumSquares"] = sum((i + 1 - ux) ** 2 * p[i][j] for i in lv for j in lv)
    f["MCC"] = _mcc(p, px, py)
    return f


def _mcc(p, px, py):
    keep = [i for i in range(len(p)) if px[i] > 0]
    if len(keep) < 2:
        return 1.0
    Q = np.zeros((len(keep), len(keep)))
    for a, i in enumerate(keep):
        for b, j in enumerate(keep):
            Q[a, b] = sum(p[i][k] * p[j][k] / (px[i] * py[k]) for k in keep)
    ev = sorted(np.linalg.eigvals(Q).real, reverse=True)
    return math.sqrt(ev[1]) if ev[1] > 1e-12 * ev[0] else 0.0


def glcm_oracle(L, ng):
    rows = []
    for d in DIRS13:
        P = glcm_counts(L, ng, d)
        if sum(sum(r) for r in P) > 0:
            rows.append(glcm_feature_dict(P))
    if not rows:
        return None
    return {k: sum(r[k] for r in rows) / len(rows) for k in rows[0]}


# ------------------------------------------------------------- runs / zones

def runs(L, d):
    """List of (level, length) for every maximal run along d."""
    out = []
    for v in _voxels(L):
        prev = (v[0] - d[0], v[1] - d[1], v[2] - d[2])
        if _inside(L.shape, prev) and L[prev] == L[v]:
            continue
        n, u = 0, v
        while _inside(L.shape, u) and L[u] == L[v]:
            n += 1
            u = (u[0] + d[0], u[1] + d[1], u[2] + d[2])
        out.append((int(L[v]), n))
    return out


def zones(L):
    """List of (level, size) for 26-connected equal-level zones."""
    seen = set()
    out = []
    for v in _voxels(L):
        if v in seen:
            continue
        g = L[v]
        q = deque([v])
        seen.add(v)
        size = 0
        while q:
            c = q.popleft()
            size += 1
            for d in NEIGH26:
                u = (c[0] + d[0], c[1] + d[1], c[2] + d[2])
                if _inside(L.shape, u) and u not in seen and L[u] == g:
                    seen.add(u)
                    q.append(u)
        out.append((int(g), size))
    return out


def emphasis(items, n_voxels, names):
    """Run/zone statistics straight from the (level, length) list."""
    nr = len(items)
    cnt = {}
    for g, n in items:
        cnt[(g, n)] = cnt.get((g, n), 0) + 1
    p = {k: c / nr for k, c in cnt.items()}
    gl, ln = {}, {}
    for (g, n), c in cnt.items():
        gl[g] = gl.get(g, 0) + c
        ln[n] = ln.get(n, 0) + c
    mu_i = sum(g * q for (g, n), q in p.items())
    mu_j = sum(n * q for (g, n), q in p.items())
    vals = [
        sum(q / n ** 2 for (g, n), q in p.items()),
        sum(q * n ** 2 for (g, n), q in p.items()),
        sum(c ** 2 for c in gl.values()) / nr,
        sum(c ** 2 for c in gl.values()) / nr ** 2,
        sum(c ** 2 for c in ln.values()) / nr,
        sum(c ** 2 for c in ln.values()) / nr ** 2,
        nr / n_voxels,
        sum(q * (g - mu_i) ** 2 for (g, n), q in p.items()),
        sum(q * (n - mu_j) ** 2 for (g, n), q in p.items()),
        _entropy(p.values()),
        sum(q / g ** 2 for (g, n), q in p.items()),
        sum(q * g ** 2 for (g, n), q in p.items()),
        sum(q / (g ** 2 * n ** 2) for (g, n), q in p.items()),
        sum(q * g ** 2 / n ** 2 for (g, n), q in p.items()),
        sum(q * n ** 2 / g ** 2 for (g, n), q in p.items()),
        sum(q * g ** 2 * n ** 2 for (g, n), q in p.items()),
    ]
    return dict(zip(names, vals))


def glrlm_oracle(L, names):
    nv = len(_voxels(L))
    per = [emphasis(runs(L, d), nv, names) for d in DIRS13]
    return {k: sum(r[k] for r in per) / len(per) for k in names}


def glszm_oracle(L, names):
    return emphasis(zones(L), len(_voxels(L)), names)


# -------------------------------------------------------------------- NGTDM

def ngtdm_oracle(L, ng):
    n = [0] * (ng + 1)
    s = [0.0] * (ng + 1)
    for v in _voxels(L):
        tot, cnt = 0, 0
        for d in NEIGH26:
            u = (v[0] + d[0], v[1] + d[1], v[2] + d[2])
            if _inside(L.shape, u) and L[u] > 0:
                tot += int(L[u])
                cnt += 1
        if cnt:
            g = int(L[v])
            n[g] += 1
            s[g] += abs(g - tot / cnt)
    nvp = sum(n)
    if nvp == 0:
        return dict.fromkeys(("Coarseness", "Contrast", "Busyness", "Complexity", "Strength"), 0.0)
    lv = [g for g in range(1, ng + 1) if n[g] > 0]
    p = {g: n[g] / nvp for g in lv}
    ngp = len(lv)
    ps = sum(p[g] * s[g] for g in lv)
    stot = sum(s[g] for g in lv)
    f = {"Coarseness": 1.0 / ps if ps > 0 else 0.0}
    if ngp > 1:
        f["Contrast"] = (sum(p[a] * p[b] * (a - b) ** 2 for a in lv for b in lv)
                         / (ngp * (ngp - 1)) * stot / nvp)
    else:
        f["Contrast"] = 0.0
    bden = sum(abs(a * p[a] - b * p[b]) for a in lv for b in lv)
    f["Busyness"] = ps / bden if bden > 0 else 0.0
    f["Complexity"] = sum(abs(a - b) * (p[a] * s[a] + p[b] * s[b]) / (p[a] + p[b])
                          for a in lv for b in lv) / nvp
    f["Strength"] = (sum((p[a] + p[b]) * (a - b) ** 2 for a in lv for b in lv) / stot
                     if stot > 0 else 0.0)
    return f


# ---------------------------------------------------------------------- FOS

def _nearest_rank(xs, pct):
    k = max(1, math.ceil(pct / 100 * len(xs)))
    return xs[k - 1]


def fos_oracle(values, L, voxel_volume=1.0):
    xs = sorted(float(values[v]) for v in _voxels(L))
    n = len(xs)
    mean = math.fsum(xs) / n
    var = math.fsum((x - mean) ** 2 for x in xs) / n
    m3 = math.fsum((x - mean) ** 3 for x in xs) / n
    m4 = math.fsum((x - mean) ** 4 for x in xs) / n
    p10, p90 = _nearest_rank(xs, 10), _nearest_rank(xs, 90)
    rob = [x for x in xs if p10 <= x <= p90]
    rm = math.fsum(rob) / len(rob)
    hist = {}
    for v in _voxels(L):
        hist[int(L[v])] = hist.get(int(L[v]), 0) + 1
    ph = [c / n for c in hist.values()]
    energy = math.fsum(x * x for x in xs)
    med = xs[n // 2] if n % 2 else (xs[n // 2 - 1] + xs[n // 2]) / 2
    return {
        "Energy": energy, "TotalEnergy": energy * voxel_volume, "Entropy": _entropy(ph),
        "Minimum": xs[0], "10Percentile": p10, "90Percentile": p90, "Maximum": xs[-1],
        "Mean": mean, "Median": med,
        "InterquartileRange": _nearest_rank(xs, 75) - _nearest_rank(xs, 25),
        "Range": xs[-1] - xs[0],
        "MeanAbsoluteDeviation": math.fsum(abs(x - mean) for x in xs) / n,
        "RobustMeanAbsoluteDeviation": math.fsum(abs(x - rm) for x in rob) / len(rob),
        "RootMeanSquared": math.sqrt(energy / n), "StandardDeviation": math.sqrt(var),
        "Skewness": m3 / var ** 1.5 if var > 0 else 0.0,
        "Kurtosis": m4 / var ** 2 if var > 0 else 0.0,
        "Variance": var, "Uniformity": sum(q * q for q in ph),
    }


# ------------------------------------------------------------------ metrics

def auc_pairs(scores, labels) -> Fraction:
    """Exhaustive pair counting in exact rational arithmetic."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    win = Fraction(0)
    for a in pos:
        for b in neg:
            if a > b:
                win += 1
            elif a == b:
                win += Fraction(1, 2)
    return win / (len(pos) * len(neg))


def conv3d_loops(x, w, b, stride, pads):
    """Direct cross-correlation with explicit zero padding (left pads given)."""
    n, c, X, Y, Z = x.shape
    o, _, kx, ky, kz = w.shape
    outs = [-(-dim // stride) for dim in (X, Y, Z)]
    y = np.zeros((n, o, *outs))
    for s in range(n):
        for f in range(o):
            for i in range(outs[0]):
                for j in range(outs[1]):
                    for k in range(outs[2]):
                        acc = 0.0 if b is None else float(b[f])
                        for ch in range(c):
                            for a in range(kx):
                                for bb in range(ky):
                                    for cc in range(kz):
                                        xi = i * stride + a - pads[0]
                                        yi = j * stride + bb - pads[1]
                                        zi = k * stride + cc - pads[2]
                                        if 0 <= xi < X and 0 <= yi < Y and 0 <= zi < Z:
                                            acc += x[s, ch, xi, yi, zi] * w[f, ch, a, bb, cc]
                        y[s, f, i, j, k] = acc
    return y


def numeric_grad(f, arr, eps=1e-6):
    """Central differences of scalar f() with respect to every entry of arr (in place)."""
    g = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = arr[i]
        arr[i] = old + eps
        hi = f()
        arr[i] = old - eps
        lo = f()
        arr[i] = old
        g[i] = (hi - lo) / (2 * eps)
    return g


def grad_rel_err(analytic, numeric):
    scale = max(np.abs(numeric).max(), np.abs(analytic).max(), 1e-12)
    return float(np.abs(analytic - numeric).max() / scale)


def adam_scalar(x, lr, steps, b1=0.9, b2=0.999, eps=1e-8):
    """Plain-float Adam on f(x) = x**2, returning the trajectory."""
    m = v = 0.0
    out = []
    for t in range(1, steps + 1):
        g = 2 * x
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        x -= lr * (m / (1 - b1 ** t)) / ((v / (1 - b2 ** t)) ** 0.5 + eps)
        out.append(x)
    return out
