"""Soft-margin SVM dual solved by SMO with second-order working-set selection.

Dual: min_a 1/2 a'Qa - sum(a), Q_ij = y_i y_j K_ij, 0 <= a_i <= C, y'a = 0.
The pair (i, j) is chosen as in Fan, Chen & Lin (2005): i maximises the
violation, j maximises the guaranteed objective decrease given i.
"""
from __future__ import annotations

import math

import numba
import numpy as np

TAU = 1e-12


@numba.njit(cache=True)
def smo_solve(K, y, C, tol, max_iter):
    n = K.shape[0]
    a = np.zeros(n)
    G = -np.ones(n)             # gradient of the dual objective
    it = 0
    while it < max_iter:
        # select i: argmax over I_up of -y_i G_i
        gmax = -np.inf
        i = -1
        for t in range(n):
            if (y[t] > 0 and a[t] < C) or (y[t] < 0 and a[t] > 0):
                v = -y[t] * G[t]
                if v > gmax:
                    gmax = v
                    i = t
        gmin = np.inf
        j = -1
        obj_min = np.inf
        for t in range(n):
            if (y[t] > 0 and a[t] > 0) or (y[t] < 0 and a[t] < C):
                v = -y[t] * G[t]
                if v < gmin:
                    gmin = v
                if i >= 0:
                    b = gmax - v
                    if b > 0:
                        q = K[i, i] + K[t, t] - 2.0 * K[i, t]
                        if q <= 0:
                            q = TAU
                        o = -(b * b) / q
                        if o <= obj_min:
                            obj_min = o
                            j = t
        if i < 0 or j < 0 or gmax - gmin < tol:
            break
        it += 1
        yi = y[i]
        yj = y[j]
        qij = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if qij <= 0:
            qij = TAU
        # move along y_i e_i - y_j e_j
        step = (-yi * G[i] + yj * G[j]) / qij
        ai_old = a[i]
        aj_old = a[j]
        # bounds on step from the box constraints
        if yi > 0:
            hi_i = C - ai_old
            lo_i = -ai_old
        else:
            hi_i = ai_old
            lo_i = ai_old - C
        if yj > 0:
            hi_j = aj_old
            lo_j = aj_old - C
        else:
            hi_j = C - aj_old
            lo_j = -aj_old
        hi = min(hi_i, hi_j)
        lo = max(lo_i, lo_j)
        if step > hi:
            step = hi
        if step < lo:
            step = lo
        a[i] = ai_old + yi * step
        a[j] = aj_old - yj * step
        if a[i] < 0:
            a[i] = 0.0
        if a[i] > C:
            a[i] = C
        if a[j] < 0:
            a[j] = 0.0
        if a[j] > C:
            a[j] = C
        di = a[i] - ai_old
        dj = a[j] - aj_old
        for t in range(n):
            G[t] += y[t] * (K[t, i] * y[i] * di + K[t, j] * y[j] * dj)
    # bias: average over free vectors, else midpoint of the feasible range
    s = 0.0
    nf = 0
    ub = np.inf
    lb = -np.inf
    for t in range(n):
        yg = y[t] * G[t]
        if 0 < a[t] < C:
            s += yg
            nf += 1
        elif (a[t] == 0 and y[t] > 0) or (a[t] == C and y[t] < 0):
            ub = min(ub, yg)
        else:
            lb = max(lb, yg)
    if nf > 0:
        rho = s / nf
    else:
        rho = 0.5 * (ub + lb) if np.isfinite(ub) and np.isfinite(lb) else (ub if np.isfinite(ub) else lb)
    return a, -rho, it


def rbf_kernel(A, B, gamma: float) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    d2 = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(d2, 0.0))


def linear_kernel(A, B) -> np.ndarray:
    return np.asarray(A, dtype=np.float64) @ np.asarray(B, dtype=np.float64).T


def fit_svm(K, y, C: float, tol: float = 1e-3, max_iter: int = 200000):
    """Returns (alpha, b); decision f(x) = sum_i alpha_i y_i K(x_i, x) + b."""
    ys = np.where(np.asarray(y) > 0, 1.0, -1.0)
    a, b, _ = smo_solve(np.ascontiguousarray(K, dtype=np.float64), ys, float(C), tol, max_iter)
    return a, b


# ------------------------------------------------------------------ Platt

def platt_fit(f, y, max_iter: int = 100) -> tuple[float, float]:
    """Sigmoid P(y=1|f) = 1 / (1 + exp(A f + B)) by Newton with backtracking.

    Uses Platt's smoothed targets and the numerically stable formulation of
    Lin, Lin & Weng (2007).
    """
    f = np.asarray(f, dtype=np.float64)
    y = np.asarray(y)
    n_pos = int((y > 0).sum())
    n_neg = len(y) - n_pos
    hi = (n_pos + 1.0) / (n_pos + 2.0)
    lo = 1.0 / (n_neg + 2.0)
    t = np.where(y > 0, hi, lo)
    A, B = 0.0, math.log((n_neg + 1.0) / (n_pos + 1.0))
    sigma = 1e-12

    def objective(A, B):
        z = f * A + B
        return float(np.sum(np.where(z >= 0, t * z + np.log1p(np.exp(-z)),
                                     (t - 1) * z + np.log1p(np.exp(z)))))

    fval = objective(A, B)
    for _ in range(max_iter):
        z = f * A + B
        p = np.where(z >= 0, np.exp(-z) / (1 + np.exp(-z)), 1 / (1 + np.exp(z)))
        q = 1 - p
        d2 = p * q
        h11 = sigma + np.dot(f * f, d2)
        h22 = sigma + d2.sum()
        h21 = np.dot(f, d2)
        d1 = t - p
        g1 = np.dot(f, d1)
        g2 = d1.sum()
        if abs(g1) < 1e-5 and abs(g2) < 1e-5:
            break
        det = h11 * h22 - h21 * h21
        dA = -(h22 * g1 - h21 * g2) / det
        dB = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * dA + g2 * dB
        step = 1.0
        while step >= 1e-10:
            nA, nB = A + step * dA, B + step * dB
            nf = objective(nA, nB)
            if nf < fval + 1e-4 * step * gd:
                A, B, fval = nA, nB, nf
                break
            step /= 2.0
        else:
            break
    return float(A), float(B)


def platt_apply(f, A: float, B: float) -> np.ndarray:
    z = np.asarray(f, dtype=np.float64) * A + B
    return np.where(z >= 0, np.exp(-z) / (1 + np.exp(-z)), 1 / (1 + np.exp(z)))
