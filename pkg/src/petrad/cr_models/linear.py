"""Penalised linear models solved by coordinate descent.

``logistic_path``: glmnet-style penalised logistic regression
    min  -(1/n) sum loglik(b0 + x_i beta) + lam * (mix * |beta|_1 + (1 - mix)/2 * |beta|_2^2)
solved by an outer IRLS loop and inner cyclic soft-thresholding on the
weighted least-squares surrogate, with warm starts down a log-spaced path.

``l1svm_path``: L1-penalised squared-hinge SVM
    min  (1/n) sum max(0, 1 - y_i (b0 + x_i beta))^2 + lam * |beta|_1
solved by proximal coordinate descent with the per-coordinate Lipschitz
bound (2/n) sum_i x_ij^2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np


@numba.njit(cache=True)
def _soft(z, g):
    if z > g:
        return z - g
    if z < -g:
        return z + g
    return 0.0


@numba.njit(cache=True)
def _sigmoid(z):
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


@numba.njit(cache=True)
def _wls_cd(X, w, r, beta, b0, lam1, lam2, xwx, tol, max_sweeps):
    """Cyclic CD on (1/2n) sum w_i (r_i)^2 + lam1 |beta|_1 + lam2/2 |beta|^2.

    ``r`` holds the working residual z - eta and is updated in place.
    Alternates full sweeps with sweeps over the active set.
    """
    n, d = X.shape
    sw = 0.0
    for i in range(n):
        sw += w[i]
    active_only = False
    for sweep in range(max_sweeps):
        dmax = 0.0
        # intercept
        s = 0.0
        for i in range(n):
            s += w[i] * r[i]
        db = s / sw
        if db != 0.0:
            b0 += db
            for i in range(n):
                r[i] -= db
            dmax = max(dmax, sw / n * db * db)
        for j in range(d):
            bj = beta[j]
            if active_only and bj == 0.0:
                continue
            if xwx[j] == 0.0:
                continue
            g = 0.0
            for i in range(n):
                g += w[i] * X[i, j] * r[i]
            g = g / n + xwx[j] * bj
            nb = _soft(g, lam1) / (xwx[j] + lam2)
            if nb != bj:
                delta = nb - bj
                beta[j] = nb
                for i in range(n):
                    r[i] -= delta * X[i, j]
                dmax = max(dmax, xwx[j] * delta * delta)
        if dmax < tol:
            if active_only:
                active_only = False      # confirm with a full sweep
            else:
                break
        else:
            active_only = True
    return b0


@numba.njit(cache=True)
def _logistic_fit(X, y, beta, b0, lam1, lam2, tol, max_outer):
    n, d = X.shape
    w = np.empty(n)
    r = np.empty(n)
    xwx = np.empty(d)
    eta = np.empty(n)
    for outer in range(max_outer):
        for i in range(n):
            s = b0
            for j in range(d):
                if beta[j] != 0.0:
                    s += X[i, j] * beta[j]
            eta[i] = s
            p = _sigmoid(s)
            wi = p * (1.0 - p)
            if wi < 1e-5:
                wi = 1e-5
            w[i] = wi
            r[i] = (y[i] - p) / wi
        for j in range(d):
            s = 0.0
            for i in range(n):
                s += w[i] * X[i, j] * X[i, j]
            xwx[j] = s / n
        old = beta.copy()
        ob = b0
        b0 = _wls_cd(X, w, r, beta, b0, lam1, lam2, xwx, tol, 1000)
        dmax = (b0 - ob) ** 2
        for j in range(d):
            dmax = max(dmax, xwx[j] * (beta[j] - old[j]) ** 2)
        if dmax < tol:
            break
    return b0


@numba.njit(cache=True)
def _logistic_grad(X, y, beta, b0):
    n, d = X.shape
    res = np.empty(n)
    for i in range(n):
        s = b0
        for j in range(d):
            if beta[j] != 0.0:
                s += X[i, j] * beta[j]
        res[i] = y[i] - _sigmoid(s)
    g = np.zeros(d)
    for j in range(d):
        acc = 0.0
        for i in range(n):
            acc += X[i, j] * res[i]
        g[j] = acc / n
    return g


@dataclass
class PathResult:
    lambdas: np.ndarray
    coefs: np.ndarray           # (n_lambda_run, d)
    intercepts: np.ndarray
    final_grad: np.ndarray      # |loss gradient| at the last fitted lambda


def _lambda_grid(lam_max: float, n_lambda: int, ratio: float) -> np.ndarray:
    return lam_max * np.logspace(0.0, math.log10(ratio), n_lambda)


def logistic_path(X, y, mix: float = 1.0, n_lambda: int = 30, ratio: float = 0.01,
                  max_active: int | None = None, tol: float = 1e-8) -> PathResult:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, d = X.shape
    ybar = y.mean()
    b0 = math.log(ybar / (1.0 - ybar))
    beta = np.zeros(d)
    g0 = np.abs(X.T @ (y - ybar)) / n
    lam_max = g0.max() / max(mix, 1e-3)
    lams = _lambda_grid(max(lam_max, 1e-12), n_lambda, ratio)
    coefs, icpt = [], []
    for lam in lams:
        b0 = _logistic_fit(X, y, beta, b0, lam * mix, lam * (1.0 - mix), tol, 100)
        coefs.append(beta.copy())
        icpt.append(b0)
        if max_active is not None and np.count_nonzero(beta) >= max_active:
            break
    grad = np.abs(_logistic_grad(X, y, beta, b0))
    return PathResult(lams[:len(coefs)], np.asarray(coefs), np.asarray(icpt), grad)


@numba.njit(cache=True)
def _sqhinge_fit(X, ys, beta, b0, lam, L, tol, max_sweeps):
    n, d = X.shape
    f = np.empty(n)
    for i in range(n):
        s = b0
        for j in range(d):
            if beta[j] != 0.0:
                s += X[i, j] * beta[j]
        f[i] = s
    active_only = False
    for sweep in range(max_sweeps):
        dmax = 0.0
        # intercept, Lipschitz constant 2
        g = 0.0
        for i in range(n):
            m = 1.0 - ys[i] * f[i]
            if m > 0:
                g -= ys[i] * m
        g *= 2.0 / n
        db = -g / 2.0
        if db != 0.0:
            b0 += db
            for i in range(n):
                f[i] += db
            dmax = max(dmax, db * db)
        for j in range(d):
            bj = beta[j]
            if active_only and bj == 0.0:
                continue
            if L[j] == 0.0:
                continue
            g = 0.0
            for i in range(n):
                m = 1.0 - ys[i] * f[i]
                if m > 0:
                    g -= ys[i] * X[i, j] * m
            g *= 2.0 / n
            nb = _soft(bj - g / L[j], lam / L[j])
            if nb != bj:
                delta = nb - bj
                beta[j] = nb
                for i in range(n):
                    f[i] += delta * X[i, j]
                dmax = max(dmax, L[j] * delta * delta)
        if dmax < tol:
            if active_only:
                active_only = False
            else:
                break
        else:
            active_only = True
    return b0


def _sqhinge_grad(X, ys, beta, b0):
    f = X @ beta + b0
    m = np.maximum(1.0 - ys * f, 0.0)
    return -(2.0 / X.shape[0]) * (X.T @ (ys * m))


def l1svm_path(X, y, n_lambda: int = 30, ratio: float = 0.01, max_active: int | None = None,
               tol: float = 1e-9) -> PathResult:
    X = np.ascontiguousarray(X, dtype=np.float64)
    ys = np.where(np.asarray(y) > 0, 1.0, -1.0)
    n, d = X.shape
    L = 2.0 * (X * X).sum(axis=0) / n
    beta = np.zeros(d)
    b0 = _sqhinge_fit(X, ys, beta, 0.0, np.inf, L, tol, 200)   # intercept only
    lam_max = np.abs(_sqhinge_grad(X, ys, beta, b0)).max()
    lams = _lambda_grid(max(lam_max, 1e-12), n_lambda, ratio)
    coefs, icpt = [], []
    for lam in lams:
        b0 = _sqhinge_fit(X, ys, beta, b0, lam, L, tol, 5000)
        coefs.append(beta.copy())
        icpt.append(b0)
        if max_active is not None and np.count_nonzero(beta) >= max_active:
            break
    grad = np.abs(_sqhinge_grad(X, ys, beta, b0))
    return PathResult(lams[:len(coefs)], np.asarray(coefs), np.asarray(icpt), grad)


def rank_from_path(path: PathResult) -> np.ndarray:
    """Order features by when they enter the path.

    Earlier entry ranks higher; features entering at the same lambda are
    ordered by |coefficient| there. Features that never enter follow, ordered
    by the magnitude of the loss gradient at the last lambda. Remaining ties go
    to the lower column index.
    """
    C = path.coefs
    d = C.shape[1]
    nz = C != 0.0
    entered = nz.any(axis=0)
    entry = np.where(entered, nz.argmax(axis=0), C.shape[0])
    mag = np.where(entered, np.abs(C[np.minimum(entry, C.shape[0] - 1), np.arange(d)]), 0.0)
    key_grad = np.where(entered, 0.0, path.final_grad)
    return np.lexsort((np.arange(d), -key_grad, -mag, entry))


# --------------------------------------------------- ridge logistic (Newton)

def fit_ridge_logistic(X, y, lam: float, max_iter: int = 100, tol: float = 1e-10):
    """Newton iterations for -(1/n) loglik + lam/2 |beta|^2 (intercept free)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, d = X.shape
    A = np.hstack([np.ones((n, 1)), X])
    theta = np.zeros(d + 1)
    pen = np.full(d + 1, lam)
    pen[0] = 0.0

    def loss(th):
        z = A @ th
        return float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * np.sum(pen * th * th))

    cur = loss(theta)
    for _ in range(max_iter):
        z = A @ theta
        p = 0.5 * (1.0 + np.tanh(0.5 * z))
        g = A.T @ (p - y) / n + pen * theta
        H = (A * (p * (1 - p))[:, None]).T @ A / n + np.diag(pen) + 1e-10 * np.eye(d + 1)
        step = np.linalg.solve(H, g)
        t = 1.0
        while t > 1e-10:
            cand = theta - t * step
            new = loss(cand)
            if new <= cur - 1e-4 * t * float(g @ step):
                break
            t /= 2
        theta, prev, cur = cand, cur, new
        if prev - cur < tol * max(1.0, abs(cur)):
            break
    return theta[1:], float(theta[0])
