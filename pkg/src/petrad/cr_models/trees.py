"""CART trees, random forests and decision stumps (numba kernels).

A forest is stored flat: node arrays for all trees are concatenated and
``roots[t]`` gives the first node of tree ``t``. Leaves have ``feature == -1``
and carry the class-1 fraction of their training samples in ``value``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .. import rng as rngmod


@numba.njit(cache=True)
def _gini_split(xs, ys, ws):
    """Best threshold on one sorted feature. Returns (score, threshold, ok).

    ``score`` is the weighted child impurity sum_children n_c * gini_c; lower
    is better. ``ws`` are integer multiplicities from the bootstrap.
    """
    m = xs.shape[0]
    tot_w = 0.0
    tot_p = 0.0
    for i in range(m):
        tot_w += ws[i]
        tot_p += ws[i] * ys[i]
    lw = 0.0
    lp = 0.0
    best = np.inf
    thr = 0.0
    ok = False
    for i in range(m - 1):
        lw += ws[i]
        lp += ws[i] * ys[i]
        if xs[i + 1] <= xs[i]:
            continue
        rw = tot_w - lw
        rp = tot_p - lp
        gl = lw - lp * lp / lw - (lw - lp) * (lw - lp) / lw
        gr = rw - rp * rp / rw - (rw - rp) * (rw - rp) / rw
        # n * gini = n - (p^2 + q^2) / n ; gl, gr already hold n_c * gini_c
        s = gl + gr
        if s < best - 1e-12:
            best = s
            thr = 0.5 * (xs[i] + xs[i + 1])
            ok = True
    return best, thr, ok


@numba.njit(cache=True)
def _grow_tree(X, y, w, max_features, min_leaf, seed, feat, thr, left, right, value,
               n_node_out, imp):
    """Grow one tree on the samples with w > 0; node arrays pre-allocated."""
    np.random.seed(seed)
    n, d = X.shape
    idx = np.empty(n, dtype=np.int64)
    m0 = 0
    for i in range(n):
        if w[i] > 0:
            idx[m0] = i
            m0 += 1
    # explicit stack of (node, start, stop) over the idx buffer
    st_node = np.empty(2 * n + 2, dtype=np.int64)
    st_lo = np.empty(2 * n + 2, dtype=np.int64)
    st_hi = np.empty(2 * n + 2, dtype=np.int64)
    sp = 0
    st_node[0] = 0
    st_lo[0] = 0
    st_hi[0] = m0
    sp = 1
    n_nodes = 1
    total_w = 0.0
    for i in range(m0):
        total_w += w[idx[i]]
    order = np.arange(d)
    xs = np.empty(n, dtype=np.float64)
    ys = np.empty(n, dtype=np.float64)
    ws = np.empty(n, dtype=np.float64)
    while sp > 0:
        sp -= 1
        node = st_node[sp]
        lo = st_lo[sp]
        hi = st_hi[sp]
        nw = 0.0
        npos = 0.0
        for i in range(lo, hi):
            nw += w[idx[i]]
            npos += w[idx[i]] * y[idx[i]]
        value[node] = npos / nw
        feat[node] = -1
        if npos == 0.0 or npos == nw or nw < 2 * min_leaf:
            continue
        parent_imp = nw - npos * npos / nw - (nw - npos) * (nw - npos) / nw
        # Fisher-Yates shuffle of candidate features, stop after max_features
        # visited features once a valid split exists
        for j in range(d):
            order[j] = j
        best = np.inf
        best_f = -1
        best_t = 0.0
        visited = 0
        for j in range(d):
            r = j + np.random.randint(0, d - j)
            tmp = order[j]
            order[j] = order[r]
            order[r] = tmp
            f = order[j]
            m = hi - lo
            for i in range(m):
                xs[i] = X[idx[lo + i], f]
            perm = np.argsort(xs[:m], kind="mergesort")
            for i in range(m):
                k = idx[lo + perm[i]]
                xs[i] = X[k, f]
                ys[i] = y[k]
                ws[i] = w[k]
            s, t, ok = _gini_split(xs[:m], ys[:m], ws[:m])
            visited += 1
            if ok and s < best - 1e-12:
                best = s
                best_f = f
                best_t = t
            if visited >= max_features and best_f >= 0:
                break
        if best_f < 0:
            continue
        # partition idx[lo:hi] in place, stable
        m = hi - lo
        buf = np.empty(m, dtype=np.int64)
        nl = 0
        for i in range(lo, hi):
            if X[idx[i], best_f] <= best_t:
                buf[nl] = idx[i]
                nl += 1
        nr = nl
        for i in range(lo, hi):
            if X[idx[i], best_f] > best_t:
                buf[nr] = idx[i]
                nr += 1
        for i in range(m):
            idx[lo + i] = buf[i]
        feat[node] = best_f
        thr[node] = best_t
        imp[best_f] += (parent_imp - best) / total_w
        l_node = n_nodes
        r_node = n_nodes + 1
        n_nodes += 2
        left[node] = l_node
        right[node] = r_node
        st_node[sp] = r_node
        st_lo[sp] = lo + nl
        st_hi[sp] = hi
        sp += 1
        st_node[sp] = l_node
        st_lo[sp] = lo
        st_hi[sp] = lo + nl
        sp += 1
    n_node_out[0] = n_nodes


@numba.njit(cache=True)
def _apply_tree(X, root, feat, thr, left, right, out_leaf):
    for i in range(X.shape[0]):
        node = root
        while feat[node] >= 0:
            if X[i, feat[node]] <= thr[node]:
                node = left[node]
            else:
                node = right[node]
        out_leaf[i] = node


@numba.njit(cache=True)
def _fit_forest(X, y, boot, max_features, min_leaf, seeds):
    n_trees = boot.shape[0]
    n, d = X.shape
    cap = 2 * n + 1
    feat = np.full(n_trees * cap, -1, dtype=np.int64)
    thr = np.zeros(n_trees * cap)
    left = np.full(n_trees * cap, -1, dtype=np.int64)
    right = np.full(n_trees * cap, -1, dtype=np.int64)
    value = np.zeros(n_trees * cap)
    roots = np.zeros(n_trees, dtype=np.int64)
    imps = np.zeros((n_trees, d))
    cnt = np.zeros(1, dtype=np.int64)
    pos = 0
    for t in range(n_trees):
        f_t = feat[pos:pos + cap]
        t_t = thr[pos:pos + cap]
        l_t = left[pos:pos + cap]
        r_t = right[pos:pos + cap]
        v_t = value[pos:pos + cap]
        _grow_tree(X, y, boot[t], max_features, min_leaf, seeds[t], f_t, t_t, l_t, r_t, v_t,
                   cnt, imps[t])
        used = cnt[0]
        for k in range(used):
            if l_t[k] >= 0:
                l_t[k] += pos
                r_t[k] += pos
        roots[t] = pos
        # compact: move next tree directly after this one
        pos += used
    return feat[:pos], thr[:pos], left[:pos], right[:pos], value[:pos], roots, imps


@dataclass
class Forest:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    roots: np.ndarray
    importances: np.ndarray      # mean over trees of per-tree normalised impurity decrease
    oob_votes: np.ndarray        # (n_train, 2) integer class votes from out-of-bag trees
    n_features: int

    def leaves(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        out = np.empty((len(self.roots), X.shape[0]), dtype=np.int64)
        for t, r in enumerate(self.roots):
            _apply_tree(X, r, self.feature, self.threshold, self.left, self.right, out[t])
        return out

    def predict_proba(self, X) -> np.ndarray:
        return self.value[self.leaves(X)].mean(axis=0)

    def oob_score(self) -> np.ndarray:
        """Out-of-bag class-1 vote share (nan where a sample was never out of bag)."""
        tot = self.oob_votes.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(tot > 0, self.oob_votes[:, 1] / np.maximum(tot, 1), np.nan)


def fit_forest(X, y, n_trees: int = 500, max_features: int | None = None, min_leaf: int = 1,
               seed: int = 0, bootstrap: bool = True) -> Forest:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, d = X.shape
    mtry = max(1, int(math.floor(math.sqrt(d)))) if max_features is None else int(max_features)
    mtry = min(mtry, d)
    g = rngmod.stream(seed, "forest")
    if bootstrap:
        draws = g.integers(0, n, size=(n_trees, n))
        boot = np.zeros((n_trees, n), dtype=np.float64)
        for t in range(n_trees):
            boot[t] = np.bincount(draws[t], minlength=n)
    else:
        boot = np.ones((n_trees, n), dtype=np.float64)
    seeds = g.integers(0, 2**31 - 1, size=n_trees)
    feat, thr, left, right, value, roots, imps = _fit_forest(X, y, boot, mtry, min_leaf, seeds)
    tot = imps.sum(axis=1, keepdims=True)
    norm = np.divide(imps, tot, out=np.zeros_like(imps), where=tot > 0)
    forest = Forest(feat.copy(), thr.copy(), left.copy(), right.copy(), value.copy(), roots,
                    norm.mean(axis=0), np.zeros((n, 2), dtype=np.int64), d)
    oob = boot == 0
    if oob.any():
        leaves = forest.leaves(X)
        vote = (forest.value[leaves] > 0.5).astype(np.int64)
        forest.oob_votes[:, 1] = (vote * oob).sum(axis=0)
        forest.oob_votes[:, 0] = ((1 - vote) * oob).sum(axis=0)
    return forest


# ---------------------------------------------------------------- stumps

@numba.njit(cache=True)
def _best_stump(Xs, order, ys, w):
    """Weighted-error-minimising stump over presorted features.

    Predicts +1 when polarity * (x - thr) > 0. Returns (err, f, thr, polarity).
    """
    n, d = Xs.shape
    wpos = 0.0
    wneg = 0.0
    for i in range(n):
        if ys[i] > 0:
            wpos += w[i]
        else:
            wneg += w[i]
    best = np.inf
    bf = 0
    bt = -np.inf
    bp = 1.0
    # threshold below all samples: everything predicted +1 (polarity +1)
    if wneg < best:
        best = wneg
        bt = -np.inf
        bp = 1.0
    if wpos < best:
        best = wpos
        bt = -np.inf
        bp = -1.0
    for f in range(d):
        lp = 0.0
        ln = 0.0
        for r in range(n - 1):
            i = order[r, f]
            if ys[i] > 0:
                lp += w[i]
            else:
                ln += w[i]
            a = Xs[i, f]
            b = Xs[order[r + 1, f], f]
            if b <= a:
                continue
            # polarity +1: left -> -1, right -> +1
            e1 = lp + (wneg - ln)
            e2 = ln + (wpos - lp)
            if e1 < best - 1e-15:
                best = e1
                bf = f
                bt = 0.5 * (a + b)
                bp = 1.0
            if e2 < best - 1e-15:
                best = e2
                bf = f
                bt = 0.5 * (a + b)
                bp = -1.0
    return best, bf, bt, bp


@dataclass
class Stumps:
    feature: np.ndarray
    threshold: np.ndarray
    polarity: np.ndarray
    alpha: np.ndarray
    weight_sums: np.ndarray    # sum of sample weights after each round (diagnostic)

    def stage_margins(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        h = np.where(self.polarity[:, None] * (X[:, self.feature].T - self.threshold[:, None]) > 0,
                     1.0, -1.0)
        return np.cumsum(self.alpha[:, None] * h, axis=0)

    def decision(self, X) -> np.ndarray:
        if len(self.alpha) == 0:
            return np.zeros(np.asarray(X).shape[0])
        return self.stage_margins(X)[-1]


def fit_adaboost(X, y, n_rounds: int = 50) -> Stumps:
    """Discrete two-class SAMME boosting of depth-1 stumps."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    ys = np.where(np.asarray(y) > 0, 1.0, -1.0)
    n = X.shape[0]
    order = np.ascontiguousarray(np.argsort(X, axis=0, kind="mergesort"))
    w = np.full(n, 1.0 / n)
    feats, thrs, pols, alphas, sums = [], [], [], [], []
    for _ in range(n_rounds):
        err, f, t, p = _best_stump(X, order, ys, w)
        err = max(float(err), 0.0)
        if err >= 0.5 and alphas:
            break
        h = np.where(p * (X[:, f] - t) > 0, 1.0, -1.0)
        if err <= 1e-10:
            feats.append(f), thrs.append(t), pols.append(p), alphas.append(10.0)
            sums.append(1.0)
            break
        alpha = math.log((1.0 - err) / err)
        feats.append(f), thrs.append(t), pols.append(p), alphas.append(alpha)
        w = w * np.exp(alpha * (h != ys))
        w /= w.sum()
        sums.append(float(w.sum()))
    return Stumps(np.asarray(feats, dtype=np.int64), np.asarray(thrs, dtype=np.float64),
                  np.asarray(pols, dtype=np.float64), np.asarray(alphas, dtype=np.float64),
                  np.asarray(sums, dtype=np.float64))
