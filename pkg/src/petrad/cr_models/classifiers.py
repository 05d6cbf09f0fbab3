"""The nine classifiers behind one fit / score contract.

Every model standardises its inputs with statistics from its own training
rows. ``predict_score`` is what ranking metrics use (raw margins for KSVM,
LSVM and AdaBoost, probabilities otherwise); ``predict_proba`` maps margins
through a Platt sigmoid fitted on the training scores, and ``predict_label``
thresholds the probability at 0.5.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .. import rng as rngmod
from ..archive import load_archive, save_archive
from .scaling import StandardizeStats, standardize_apply, standardize_fit
from .svm import fit_svm, linear_kernel, platt_apply, platt_fit, rbf_kernel
from .trees import Forest, Stumps, fit_adaboost, fit_forest

CLASSIFIERS = ("L2-LOG", "KSVM", "LSVM", "AdaBoost", "RF", "Nnet", "KNN", "LDA", "NB")
MARGIN_METHODS = ("KSVM", "LSVM", "AdaBoost")

DEFAULT_GRIDS: dict[str, dict[str, list]] = {
    "L2-LOG": {"lam": [0.001, 0.01, 0.1, 1.0]},
    "KSVM": {"gamma": ["1/d", 0.01, 0.1], "C": [0.1, 1.0, 10.0]},
    "LSVM": {"C": [0.1, 1.0, 10.0]},
    "AdaBoost": {"rounds": [50, 100]},
    "RF": {"n_trees": [500]},
    "Nnet": {"size": [4, 8, 16], "decay": [0.01]},
    "KNN": {"k": [3, 5, 9, 15]},
    "LDA": {"shrinkage": [1e-3]},
    "NB": {"var_smoothing": [1e-9]},
}

# sign per parameter: +1 when a larger value regularises more
_STRENGTH = {"lam": 1, "C": -1, "gamma": -1, "rounds": -1, "n_trees": 1, "size": -1,
             "decay": 1, "k": 1, "shrinkage": 1, "var_smoothing": 1}


@dataclass(frozen=True)
class ClassifierSpec:
    method: str
    grid: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in CLASSIFIERS:
            raise ValueError(f"unknown classifier {self.method!r}")
        if not self.grid:
            object.__setattr__(self, "grid", DEFAULT_GRIDS[self.method])
        if any(len(v) == 0 for v in self.grid.values()):
            raise ValueError(f"{self.method}: empty hyper-parameter grid")

    def configurations(self) -> list[dict]:
        keys = sorted(self.grid)
        return [dict(zip(keys, vals)) for vals in itertools.product(*(self.grid[k] for k in keys))]


def regularisation_key(params: dict, n_features: int = 1) -> tuple:
    """Sort key where smaller means more strongly regularised."""
    key = []
    for name in sorted(params):
        v = resolve_param(params[name], n_features)
        key.append(-_STRENGTH.get(name, 1) * float(v))
    return tuple(key)


def resolve_param(v, n_features: int):
    if v == "1/d":
        return 1.0 / n_features
    return v


@dataclass
class TrainedClassifier:
    method: str
    params: dict
    stats: StandardizeStats
    arrays: dict[str, np.ndarray]
    platt: tuple[float, float] | None = None

    @property
    def n_features(self) -> int:
        return len(self.stats.mean)

    def save(self, path) -> None:
        arrays = {f"model.{k}": v for k, v in self.arrays.items()}
        arrays["stats.mean"] = self.stats.mean
        arrays["stats.sd"] = self.stats.sd
        meta = {"kind": "cr-classifier", "method": self.method, "params": self.params,
                "platt": list(self.platt) if self.platt else None}
        save_archive(path, arrays, meta)

    @classmethod
    def load(cls, path) -> "TrainedClassifier":
        arrays, meta = load_archive(path)
        if meta.get("kind") != "cr-classifier":
            raise ValueError(f"{path}: not a classifier archive")
        stats = StandardizeStats(arrays.pop("stats.mean"), arrays.pop("stats.sd"))
        model = {k[len("model."):]: v for k, v in arrays.items()}
        platt = tuple(meta["platt"]) if meta["platt"] else None
        return cls(meta["method"], meta["params"], stats, model, platt)


# ------------------------------------------------------------- per-method

def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _fit_l2log(Z, y, p, seed):
    from .linear import fit_ridge_logistic
    w, b = fit_ridge_logistic(Z, y, float(p["lam"]))
    return {"w": w, "b": np.array([b])}


def _fit_ksvm(Z, y, p, seed):
    gamma = float(resolve_param(p["gamma"], Z.shape[1]))
    a, b = fit_svm(rbf_kernel(Z, Z, gamma), y, float(p["C"]))
    sv = a > 0
    coef = a[sv] * np.where(y[sv] > 0, 1.0, -1.0)
    return {"sv": Z[sv], "coef": coef, "b": np.array([b]), "gamma": np.array([gamma])}


def _fit_lsvm(Z, y, p, seed):
    a, b = fit_svm(linear_kernel(Z, Z), y, float(p["C"]))
    w = Z.T @ (a * np.where(y > 0, 1.0, -1.0))
    return {"w": w, "b": np.array([b])}


def _fit_ada(Z, y, p, seed):
    s = fit_adaboost(Z, y, int(p["rounds"]))
    return {"feature": s.feature, "threshold": s.threshold, "polarity": s.polarity,
            "alpha": s.alpha}


def _fit_rf(Z, y, p, seed):
    f = fit_forest(Z, y, int(p["n_trees"]), seed=seed)
    return {"feature": f.feature, "threshold": f.threshold, "left": f.left, "right": f.right,
            "value": f.value, "roots": f.roots, "importances": f.importances}


def _nnet_unpack(theta, d, h):
    i = 0
    W1 = theta[i:i + d * h].reshape(d, h)
    i += d * h
    b1 = theta[i:i + h]
    i += h
    w2 = theta[i:i + h]
    b2 = theta[i + h]
    return W1, b1, w2, b2


def _fit_nnet(Z, y, p, seed):
    n, d = Z.shape
    h = int(p["size"])
    decay = float(p["decay"])
    g = rngmod.stream(seed, "nnet-init")
    theta0 = g.uniform(-0.5, 0.5, size=d * h + 2 * h + 1)
    penal = np.ones_like(theta0)
    penal[d * h:d * h + h] = 0.0      # hidden biases
    penal[-1] = 0.0                   # output bias

    def f(theta):
        W1, b1, w2, b2 = _nnet_unpack(theta, d, h)
        H = _sigmoid(Z @ W1 + b1)
        z = H @ w2 + b2
        loss = np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * decay * np.sum(penal * theta ** 2)
        dz = (_sigmoid(z) - y) / n
        gw2 = H.T @ dz
        gb2 = dz.sum()
        dH = np.outer(dz, w2) * H * (1 - H)
        gW1 = Z.T @ dH
        gb1 = dH.sum(axis=0)
        grad = np.concatenate([gW1.ravel(), gb1, gw2, [gb2]]) + decay * penal * theta
        return loss, grad

    res = minimize(f, theta0, jac=True, method="L-BFGS-B", options={"maxiter": 200})
    return {"theta": res.x, "shape": np.array([d, h])}


def _fit_knn(Z, y, p, seed):
    return {"X": Z.copy(), "y": y.astype(np.float64), "k": np.array([int(p["k"])])}


def _fit_lda(Z, y, p, seed):
    n, d = Z.shape
    m0, m1 = Z[y == 0].mean(axis=0), Z[y == 1].mean(axis=0)
    R = np.where((y == 1)[:, None], Z - m1, Z - m0)
    S = R.T @ R / max(n - 2, 1)
    eps = float(p["shrinkage"])
    mu = np.trace(S) / d
    S = (1 - eps) * S + eps * (mu if mu > 0 else 1.0) * np.eye(d)
    w = np.linalg.solve(S, m1 - m0)
    pi1 = y.mean()
    b = -0.5 * (m1 + m0) @ w + np.log(pi1 / (1 - pi1))
    return {"w": w, "b": np.array([b])}


def _fit_nb(Z, y, p, seed):
    var_all = Z.var(axis=0)
    eps = float(p["var_smoothing"]) * max(var_all.max(), 1e-300)
    means = np.stack([Z[y == c].mean(axis=0) for c in (0, 1)])
    vars_ = np.stack([Z[y == c].var(axis=0) for c in (0, 1)]) + eps
    priors = np.array([(y == 0).mean(), (y == 1).mean()])
    return {"means": means, "vars": vars_, "priors": priors}


_FITTERS = {"L2-LOG": _fit_l2log, "KSVM": _fit_ksvm, "LSVM": _fit_lsvm, "AdaBoost": _fit_ada,
            "RF": _fit_rf, "Nnet": _fit_nnet, "KNN": _fit_knn, "LDA": _fit_lda, "NB": _fit_nb}


def _raw_score(method: str, A: dict, Z: np.ndarray) -> np.ndarray:
    if method in ("L2-LOG", "LDA"):
        return _sigmoid(Z @ A["w"] + A["b"][0])
    if method == "LSVM":
        return Z @ A["w"] + A["b"][0]
    if method == "KSVM":
        if len(A["coef"]) == 0:
            return np.full(Z.shape[0], A["b"][0])
        return rbf_kernel(Z, A["sv"], float(A["gamma"][0])) @ A["coef"] + A["b"][0]
    if method == "AdaBoost":
        return Stumps(A["feature"], A["threshold"], A["polarity"], A["alpha"],
                      np.zeros(0)).decision(Z)
    if method == "RF":
        f = Forest(A["feature"], A["threshold"], A["left"], A["right"], A["value"], A["roots"],
                   A["importances"], np.zeros((0, 2), dtype=np.int64), Z.shape[1])
        return f.predict_proba(Z)
    if method == "Nnet":
        d, h = (int(v) for v in A["shape"])
        W1, b1, w2, b2 = _nnet_unpack(A["theta"], d, h)
        return _sigmoid(_sigmoid(Z @ W1 + b1) @ w2 + b2)
    if method == "KNN":
        X, y = A["X"], A["y"]
        k = min(int(A["k"][0]), X.shape[0])
        d2 = (Z * Z).sum(1)[:, None] + (X * X).sum(1)[None, :] - 2.0 * Z @ X.T
        d2 = np.maximum(d2, 0.0)
        nn = np.argsort(d2, axis=1, kind="stable")[:, :k]
        return y[nn].mean(axis=1)
    if method == "NB":
        ll = -0.5 * (np.log(2 * np.pi * A["vars"])[None] +
                     (Z[:, None, :] - A["means"][None]) ** 2 / A["vars"][None]).sum(axis=2)
        ll = ll + np.log(A["priors"])[None]
        return _sigmoid(ll[:, 1] - ll[:, 0])
    raise ValueError(method)


def train_classifier(X, y, spec: ClassifierSpec | str, params: dict | None = None,
                     seed: int = 0) -> TrainedClassifier:
    method = spec.method if isinstance(spec, ClassifierSpec) else spec
    if method not in CLASSIFIERS:
        raise ValueError(f"unknown classifier {method!r}")
    if params is None:
        confs = (spec if isinstance(spec, ClassifierSpec) else ClassifierSpec(method)).configurations()
        params = confs[0]
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.int64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be (n, d) with one label per row")
    if set(np.unique(y).tolist()) != {0, 1}:
        raise ValueError(f"{method}: training labels must contain both classes")
    stats = standardize_fit(X)
    Z = standardize_apply(stats, X)
    arrays = _FITTERS[method](Z, y, params, seed)
    model = TrainedClassifier(method, dict(params), stats, arrays)
    if method in MARGIN_METHODS:
        model.platt = platt_fit(_raw_score(method, arrays, Z), y)
    return model


def predict_score(model: TrainedClassifier, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.n_features:
        raise ValueError(f"model expects {model.n_features} features, got {X.shape[1]}")
    return _raw_score(model.method, model.arrays, standardize_apply(model.stats, X))


def predict_proba(model: TrainedClassifier, X) -> np.ndarray:
    s = predict_score(model, X)
    if model.platt is not None:
        return platt_apply(s, *model.platt)
    return s


def predict_label(model: TrainedClassifier, X) -> np.ndarray:
    return (predict_proba(model, X) >= 0.5).astype(np.int64)
