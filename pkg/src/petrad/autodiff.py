"""Small reverse-mode autodiff over numpy arrays.

Every operation returns a :class:`Tensor` that remembers its parents and a
closure propagating the output gradient to them. ``backward`` walks the
graph once in reverse topological order. Only what the 3D CNN needs is
here: 3D convolution, batch norm, ELU/ReLU, dropout, dense layers, concat,
reshape and a stabilised softmax cross-entropy.

Activations are laid out ``(batch, channels, x, y, z)``; conv kernels are
``(out, in, kx, ky, kz)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from .archive import load_archive, save_archive


class GraphError(RuntimeError):
    pass


class Tensor:
    __slots__ = ("data", "grad", "parents", "backward_fn", "requires_grad", "name", "consumed")

    def __init__(self, data, requires_grad: bool = False, name: str = "",
                 parents: tuple = (), backward_fn=None):
        self.data = np.asarray(data)
        if self.data.dtype.kind != "f":
            self.data = self.data.astype(np.float64)
        self.grad = None
        self.parents = parents
        self.backward_fn = backward_fn
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self.name = name
        self.consumed = False

    @property
    def shape(self):
        return self.data.shape

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g, owned: bool = False):
        """Add ``g`` into ``.grad``; ``owned`` means ``g`` is a fresh array that
        may be adopted without copying."""
        if g.shape != self.data.shape:
            raise GraphError(f"gradient shape {g.shape} != value shape {self.data.shape}")
        if self.grad is None:
            if owned and g.dtype == self.data.dtype and g.flags.c_contiguous:
                self.grad = g
            else:
                self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad += g

    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def sum(self):
        return tsum(self)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, name={self.name!r})"


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data, parents, backward_fn, name=""):
    return Tensor(data, parents=tuple(parents), backward_fn=backward_fn, name=name)


def backward(loss: Tensor) -> None:
    """Accumulate d loss / d leaf into ``.grad`` of every tensor needing it."""
    if not isinstance(loss, Tensor) or loss.backward_fn is None:
        raise GraphError("backward needs the output of a forward computation")
    if loss.data.size != 1:
        raise GraphError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss.consumed:
        raise GraphError("this graph has already been back-propagated")
    order, seen = [], set()
    stack = [(loss, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node.backward_fn is not None and node.grad is not None:
            node.backward_fn(node.grad)
            node.consumed = True
            if node is not loss:
                node.grad = None          # intermediate buffers are not kept


# ------------------------------------------------------------- elementwise

def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ValueError(f"add: shape mismatch {a.shape} vs {b.shape}")

    def bw(g):
        if a.requires_grad:
            a._accumulate(g)
        if b.requires_grad:
            b._accumulate(g)
    return _node(a.data + b.data, (a, b), bw)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ValueError(f"mul: shape mismatch {a.shape} vs {b.shape}")

    def bw(g):
        if a.requires_grad:
            a._accumulate(g * b.data)
        if b.requires_grad:
            b._accumulate(g * a.data)
    return _node(a.data * b.data, (a, b), bw)


def tsum(a: Tensor) -> Tensor:
    def bw(g):
        a._accumulate(np.broadcast_to(g, a.shape).astype(a.data.dtype))
    return _node(np.asarray(a.data.sum()), (a,), bw)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return _node(np.where(mask, x.data, 0).astype(x.data.dtype), (x,),
                 lambda g: x._accumulate(g * mask, owned=True))


def elu(x: Tensor, alpha: float = 1.0) -> Tensor:
    # neg = alpha * expm1(min(x, 0)) is 0 for x > 0, so y = max(x, 0) + neg and
    # dy/dx = neg + alpha on the negative side, 1 on the positive side
    neg = np.minimum(x.data, 0)
    np.expm1(neg, out=neg)
    if alpha != 1.0:
        neg *= alpha
    y = np.maximum(x.data, 0)
    y += neg

    def bw(g):
        d = neg + alpha if alpha != 1.0 else neg + 1
        if alpha != 1.0:
            d[x.data > 0] = 1
        d *= g
        x._accumulate(d, owned=True)
    return _node(y, (x,), bw)


def reshape(x: Tensor, shape) -> Tensor:
    return _node(x.data.reshape(shape), (x,), lambda g: x._accumulate(g.reshape(x.shape)))


def flatten(x: Tensor) -> Tensor:
    return reshape(x, (x.shape[0], -1))


def concat(xs, axis: int = 1) -> Tensor:
    xs = [_as_tensor(x) for x in xs]
    ref = xs[0].shape
    for x in xs[1:]:
        if len(x.shape) != len(ref) or any(a != b for i, (a, b) in enumerate(zip(x.shape, ref))
                                           if i != axis % len(ref)):
            raise ValueError(f"concat: incompatible shapes {ref} and {x.shape} on axis {axis}")
    sizes = np.cumsum([x.shape[axis] for x in xs])[:-1]

    def bw(g):
        for x, part in zip(xs, np.split(g, sizes, axis=axis)):
            if x.requires_grad:
                x._accumulate(np.ascontiguousarray(part))
    return _node(np.concatenate([x.data for x in xs], axis=axis), xs, bw)


def dense(x: Tensor, W: Tensor, b: Tensor) -> Tensor:
    if x.data.ndim != 2 or x.shape[1] != W.shape[0] or W.shape[1] != b.shape[0]:
        raise ValueError(f"dense: shapes {x.shape} @ {W.shape} + {b.shape} do not agree")

    def bw(g):
        if x.requires_grad:
            x._accumulate(g @ W.data.T, owned=True)
        if W.requires_grad:
            W._accumulate(x.data.T @ g)
        if b.requires_grad:
            b._accumulate(g.sum(axis=0))
    return _node(x.data @ W.data + b.data, (x, W, b), bw)


# ---------------------------------------------------------------- dropout

def dropout(x: Tensor, rate: float, key: tuple, train: bool) -> Tensor:
    """Inverted dropout; the mask comes from the stream keyed by ``key``
    (typically ``(seed, layer id, step)``)."""
    if not 0.0 <= rate < 1.0:
        raise ValueError("dropout rate must lie in [0, 1)")
    if not train or rate == 0.0:
        return _node(x.data, (x,), lambda g: x._accumulate(g))
    keep = rngmod.stream(*key).random(x.shape) >= rate
    scale = np.asarray(1.0 / (1.0 - rate), dtype=x.data.dtype)
    m = keep * scale
    return _node(x.data * m, (x,), lambda g: x._accumulate(g * m, owned=True))


# ------------------------------------------------------------- batch norm

@dataclass
class BatchNormState:
    mean: np.ndarray
    var: np.ndarray
    momentum: float = 0.9
    eps: float = 1e-5

    @classmethod
    def create(cls, channels: int, dtype=np.float32) -> "BatchNormState":
        return cls(np.zeros(channels, dtype=dtype), np.ones(channels, dtype=dtype))


def batch_norm(x: Tensor, gamma: Tensor, beta: Tensor, state: BatchNormState,
               train: bool) -> Tensor:
    """Per-channel normalisation over batch and spatial axes.

    Train mode uses batch statistics (biased variance) and updates the
    running averages; with a single sample it falls back to the running
    statistics, as in eval mode.
    """
    C = x.shape[1]
    if gamma.shape != (C,) or beta.shape != (C,):
        raise ValueError(f"batch_norm: {C} channels but gamma/beta shapes {gamma.shape}/{beta.shape}")
    axes = (0,) + tuple(range(2, x.data.ndim))
    bshape = (1, C) + (1,) * (x.data.ndim - 2)
    dt = x.data.dtype
    use_batch = train and x.shape[0] > 1
    if use_batch:
        mu = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        m = state.momentum
        state.mean = (m * state.mean + (1 - m) * mu).astype(state.mean.dtype)
        state.var = (m * state.var + (1 - m) * var).astype(state.var.dtype)
    else:
        mu, var = state.mean.astype(dt), state.var.astype(dt)
    inv = (1.0 / np.sqrt(var + state.eps)).astype(dt)
    xhat = (x.data - mu.reshape(bshape)) * inv.reshape(bshape)
    y = xhat * gamma.data.reshape(bshape) + beta.data.reshape(bshape)
    count = x.data.size // C

    def bw(g):
        sum_g = g.sum(axis=axes)
        sum_gx = (g * xhat).sum(axis=axes)
        if gamma.requires_grad:
            gamma._accumulate(sum_gx.astype(gamma.data.dtype))
        if beta.requires_grad:
            beta._accumulate(sum_g.astype(beta.data.dtype))
        if x.requires_grad:
            scale = (gamma.data.astype(dt) * inv).reshape(bshape)
            if use_batch:
                # dx = gamma/sd * (g - mean(g) - xhat * mean(g * xhat))
                gx = xhat * (-(sum_gx / count).astype(dt).reshape(bshape))
                gx += g
                gx -= (sum_g / count).astype(dt).reshape(bshape)
                gx *= scale
            else:
                gx = g * scale
            x._accumulate(gx, owned=True)
    return _node(y.astype(dt), (x, gamma, beta), bw)


# ---------------------------------------------------------- softmax + xent

def softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def softmax_xent(logits: Tensor, labels, class_weights=None) -> tuple[Tensor, np.ndarray]:
    """Mean (optionally class-weighted) cross-entropy and the softmax probabilities."""
    z = logits.data
    labels = np.asarray(labels).astype(np.int64)
    if z.ndim != 2 or labels.shape != (z.shape[0],):
        raise ValueError(f"softmax_xent: logits {z.shape} vs labels {labels.shape}")
    if labels.min() < 0 or labels.max() >= z.shape[1]:
        raise ValueError("labels out of range")
    shifted = z - z.max(axis=1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    p = np.exp(logp)
    w = np.ones(len(labels)) if class_weights is None else np.asarray(class_weights)[labels]
    wsum = w.sum()
    nll = -logp[np.arange(len(labels)), labels]
    loss = np.asarray((w * nll).sum() / wsum, dtype=z.dtype)

    def bw(g):
        d = p.copy()
        d[np.arange(len(labels)), labels] -= 1.0
        logits._accumulate((g * d * (w / wsum)[:, None]).astype(z.dtype))
    return _node(loss, (logits,), bw), p


# ------------------------------------------------------------------ conv3d

def same_padding(n: int, k: int, stride: int) -> tuple[int, int, int]:
    """(output size, left pad, right pad) for 'same' padding."""
    out = -(-n // stride)
    total = max((out - 1) * stride + k - n, 0)
    return out, total // 2, total - total // 2


def _plan(shape_in, kshape, stride, tz_max):
    N, C, X, Y, Z = shape_in
    O, Ci, kx, ky, kz = kshape
    (Xo, lx, _), (Yo, ly, _), (Zo, lz, _) = (same_padding(n, k, stride)
                                             for n, k in ((X, kx), (Y, ky), (Z, kz)))
    tz = min(Zo, tz_max)
    nt = -(-Zo // tz)
    zw = stride * (tz - 1) + kz                     # input window per tile
    zp = stride * tz * (nt - 1) + zw                # padded z length needed
    xp = stride * (Xo - 1) + kx
    yp = stride * (Yo - 1) + ky
    return dict(N=N, C=C, O=O, kx=kx, ky=ky, kz=kz, Xo=Xo, Yo=Yo, Zo=Zo, lx=lx, ly=ly, lz=lz,
                tz=tz, nt=nt, zw=zw, zp=zp, xp=xp, yp=yp, s=stride)


def _pad(x, P):
    N, C, X, Y, Z = x.shape
    xpad = np.zeros((N, C, P["xp"], P["yp"], P["zp"]), dtype=x.dtype)
    # right padding may be negative when the stride skips trailing voxels
    cx = min(X, P["xp"] - P["lx"])
    cy = min(Y, P["yp"] - P["ly"])
    cz = min(Z, P["zp"] - P["lz"])
    xpad[:, :, P["lx"]:P["lx"] + cx, P["ly"]:P["ly"] + cy, P["lz"]:P["lz"] + cz] = \
        x[:, :, :cx, :cy, :cz]
    return xpad, (cx, cy, cz)


_WORKSPACE: dict = {}


def _workspace(shape, dtype) -> np.ndarray:
    """Reusable scratch buffer; avoids page-faulting a fresh block per call."""
    key = (tuple(shape), np.dtype(dtype).str)
    buf = _WORKSPACE.get(key)
    if buf is None:
        if len(_WORKSPACE) > 32:
            _WORKSPACE.clear()
        buf = _WORKSPACE[key] = np.empty(shape, dtype=dtype)
    return buf


def _ztiles(xpad, P) -> np.ndarray:
    """Overlapping z windows, laid out (n, C, zw, nt, xp, yp)."""
    n, C = xpad.shape[:2]
    st = xpad.strides
    win = np.lib.stride_tricks.as_strided(
        xpad, shape=(n, C, P["zw"], P["nt"], P["xp"], P["yp"]),
        strides=(st[0], st[1], st[4], P["s"] * P["tz"] * st[4], st[2], st[3]), writeable=False)
    out = _workspace(win.shape, xpad.dtype)
    out[...] = win
    return out


def _columns(xpad, P):
    """(kx*ky*C*zw, n*nt*Xo*Yo) matrix: one row per kernel tap (a, b, c) and
    window offset, one column per output (sample, z-tile, x, y)."""
    n, s = xpad.shape[0], P["s"]
    Xo, Yo = P["Xo"], P["Yo"]
    zt = _ztiles(xpad, P)
    cols = _workspace((P["kx"], P["ky"], P["C"], P["zw"], n, P["nt"], Xo, Yo), xpad.dtype)
    for a in range(P["kx"]):
        for b in range(P["ky"]):
            src = zt[:, :, :, :, a:a + s * (Xo - 1) + 1:s, b:b + s * (Yo - 1) + 1:s]
            cols[a, b] = src.transpose(1, 2, 0, 3, 4, 5)
    return cols.reshape(P["kx"] * P["ky"] * P["C"] * P["zw"], -1)


def _toeplitz(w, P):
    """(O*tz, kx*ky*C*zw) banded matrix applying the z taps inside one tile."""
    O, C = P["O"], P["C"]
    wg = w.transpose(0, 2, 3, 1, 4)                              # (O, kx, ky, C, kz)
    T = np.zeros((O, P["tz"], P["kx"], P["ky"], C, P["zw"]), dtype=w.dtype)
    for t in range(P["tz"]):
        T[:, t, :, :, :, P["s"] * t:P["s"] * t + P["kz"]] = wg
    return T.reshape(O * P["tz"], -1)


def _fold_toeplitz(dT, P):
    O, C = P["O"], P["C"]
    dT = dT.reshape(O, P["tz"], P["kx"], P["ky"], C, P["zw"])
    dwg = np.zeros((O, P["kx"], P["ky"], C, P["kz"]), dtype=dT.dtype)
    for t in range(P["tz"]):
        dwg += dT[:, t, :, :, :, P["s"] * t:P["s"] * t + P["kz"]]
    return dwg.transpose(0, 3, 1, 2, 4)


def _scatter_columns(dcols, n, P, dtype):
    """Adjoint of ``_pad`` + ``_columns``: accumulate column gradients into
    the padded input."""
    C, s = P["C"], P["s"]
    Xo, Yo, nt, zw, tz = P["Xo"], P["Yo"], P["nt"], P["zw"], P["tz"]
    dc = dcols.reshape(P["kx"], P["ky"], C, zw, n, nt, Xo, Yo)
    dzt = np.zeros((n, C, zw, nt, P["xp"], P["yp"]), dtype=dtype)
    for a in range(P["kx"]):
        for b in range(P["ky"]):
            dzt[:, :, :, :, a:a + s * (Xo - 1) + 1:s, b:b + s * (Yo - 1) + 1:s] += \
                dc[a, b].transpose(2, 0, 1, 3, 4, 5)
    # fold windows back along z in a z-major buffer so each add is a block copy
    dzm = np.zeros((n, C, P["zp"], P["xp"], P["yp"]), dtype=dtype)
    for z in range(zw):
        stop = z + s * tz * (nt - 1) + 1
        dzm[:, :, z:stop:s * tz] += dzt[:, :, z]
    return dzm.transpose(0, 1, 3, 4, 2)


def _chunks(P, budget: int = 1 << 21):
    per = P["Xo"] * P["Yo"] * P["nt"] * P["kx"] * P["ky"] * P["C"] * P["zw"]
    step = max(1, budget // per)
    return [(i, min(i + step, P["N"])) for i in range(0, P["N"], step)]


def _to_output(o, n, P):
    """(O*tz, n*nt*Xo*Yo) GEMM result -> (n, O, Xo, Yo, Zo)."""
    O, tz, nt = P["O"], P["tz"], P["nt"]
    o = o.reshape(O, tz, n, nt, P["Xo"], P["Yo"]).transpose(2, 0, 4, 5, 3, 1)
    return o.reshape(n, O, P["Xo"], P["Yo"], nt * tz)[..., :P["Zo"]]


def _from_output(g, P):
    """Adjoint of ``_to_output``."""
    n = g.shape[0]
    O, tz, nt = P["O"], P["tz"], P["nt"]
    gp = np.zeros((n, O, P["Xo"], P["Yo"], nt * tz), dtype=g.dtype)
    gp[..., :P["Zo"]] = g
    gp = gp.reshape(n, O, P["Xo"], P["Yo"], nt, tz).transpose(1, 5, 0, 4, 2, 3)
    return gp.reshape(O * tz, -1)


def conv3d(x: Tensor, w: Tensor, b: Tensor | None, stride: int = 1, tz_max: int = 8) -> Tensor:
    """Cross-correlation with 'same' padding; output spatial dims ceil(n / stride).

    Computed as GEMMs: each column of the data matrix holds, for one output
    (x, y, z-tile) position, the kx*ky input z-windows it sees; a banded
    (Toeplitz) matrix built from the kernel applies the z taps inside each
    tile of ``tz_max`` outputs. Samples are processed in chunks so the column
    buffer stays cache-sized.
    """
    if x.data.ndim != 5 or w.data.ndim != 5:
        raise ValueError("conv3d expects (N, C, X, Y, Z) input and (O, C, kx, ky, kz) kernel")
    if x.shape[1] != w.shape[1]:
        raise ValueError(f"conv3d: input has {x.shape[1]} channels, kernel expects {w.shape[1]}")
    if stride not in (1, 2):
        raise ValueError("stride must be 1 or 2")
    if b is not None and b.shape != (w.shape[0],):
        raise ValueError("conv3d: bias shape mismatch")
    P = _plan(x.shape, w.shape, stride, tz_max)
    dt = x.data.dtype
    N, O = P["N"], P["O"]
    T = _toeplitz(w.data.astype(dt, copy=False), P)
    y = np.empty((N, O, P["Xo"], P["Yo"], P["Zo"]), dtype=dt)
    crop = None
    for lo, hi in _chunks(P):
        xpad, crop = _pad(x.data[lo:hi], P)
        y[lo:hi] = _to_output(T @ _columns(xpad, P), hi - lo, P)
    if b is not None:
        y += b.data.astype(dt).reshape(1, -1, 1, 1, 1)

    def bw(g):
        if b is not None and b.requires_grad:
            b._accumulate(g.sum(axis=(0, 2, 3, 4)).astype(b.data.dtype))
        if not (w.requires_grad or x.requires_grad):
            return
        dT = np.zeros_like(T) if w.requires_grad else None
        gx = np.zeros(x.shape, dtype=dt) if x.requires_grad else None
        for lo, hi in _chunks(P):
            G = _from_output(g[lo:hi], P)
            if dT is not None:
                xpad, _ = _pad(x.data[lo:hi], P)
                dT += G @ _columns(xpad, P).T
            if gx is not None:
                dpad = _scatter_columns(T.T @ G, hi - lo, P, dt)
                cx, cy, cz = crop
                gx[lo:hi, :, :cx, :cy, :cz] = dpad[:, :, P["lx"]:P["lx"] + cx,
                                                   P["ly"]:P["ly"] + cy, P["lz"]:P["lz"] + cz]
        if dT is not None:
            w._accumulate(_fold_toeplitz(dT, P).astype(w.data.dtype))
        if gx is not None:
            x._accumulate(gx, owned=True)
    return _node(y, (x, w) + ((b,) if b is not None else ()), bw)


def conv3d_reference(x: np.ndarray, w: np.ndarray, b=None, stride: int = 1) -> np.ndarray:
    """Direct loop over output voxels; slow, for testing only."""
    N, C, X, Y, Z = x.shape
    O, _, kx, ky, kz = w.shape
    (Xo, lx, rx), (Yo, ly, ry), (Zo, lz, rz) = (same_padding(n, k, stride)
                                                for n, k in ((X, kx), (Y, ky), (Z, kz)))
    xp = np.pad(x, ((0, 0), (0, 0), (lx, max(rx, 0)), (ly, max(ry, 0)), (lz, max(rz, 0))))
    out = np.zeros((N, O, Xo, Yo, Zo), dtype=np.result_type(x, w))
    for i in range(Xo):
        for j in range(Yo):
            for k in range(Zo):
                patch = xp[:, :, i * stride:i * stride + kx, j * stride:j * stride + ky,
                           k * stride:k * stride + kz]
                out[:, :, i, j, k] = np.tensordot(patch, w, axes=([1, 2, 3, 4], [1, 2, 3, 4]))
    if b is not None:
        out += np.asarray(b).reshape(1, -1, 1, 1, 1)
    return out


# -------------------------------------------------------------------- Adam

@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict[str, Tensor], state: AdamState) -> None:
    """One bias-corrected Adam update of every parameter holding a gradient."""
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for name, p in params.items():
        if p.grad is None:
            continue
        g = p.grad
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1 - state.beta1) * g
        v *= state.beta2
        v += (1 - state.beta2) * g * g
        p.data -= (state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)).astype(p.data.dtype)


def zero_grads(params: dict[str, Tensor]) -> None:
    for p in params.values():
        p.grad = None


# -------------------------------------------------------------- checkpoint

def save_checkpoint(path, params: dict[str, Tensor], bn: dict[str, BatchNormState],
                    adam: AdamState | None = None, meta: dict | None = None) -> None:
    """Archive of named little-endian arrays: parameters, batch-norm running
    statistics and (optionally) Adam moments, plus JSON metadata."""
    arrays = {f"param/{k}": p.data for k, p in params.items()}
    for k, s in bn.items():
        arrays[f"bn/{k}/mean"] = s.mean
        arrays[f"bn/{k}/var"] = s.var
    info = dict(meta or {})
    if adam is not None:
        for k in adam.m:
            arrays[f"adam/m/{k}"] = adam.m[k]
            arrays[f"adam/v/{k}"] = adam.v[k]
        info["adam"] = {"lr": adam.lr, "beta1": adam.beta1, "beta2": adam.beta2,
                        "eps": adam.eps, "step": adam.step}
    save_archive(path, arrays, info)


def load_checkpoint(path):
    arrays, meta = load_archive(path)
    params = {k[len("param/"):]: Tensor(v, requires_grad=True, name=k[len("param/"):])
              for k, v in arrays.items() if k.startswith("param/")}
    bn = {}
    for k, v in arrays.items():
        if k.startswith("bn/") and k.endswith("/mean"):
            name = k[len("bn/"):-len("/mean")]
            bn[name] = BatchNormState(v, arrays[f"bn/{name}/var"])
    adam = None
    if "adam" in meta:
        a = meta["adam"]
        adam = AdamState(a["lr"], a["beta1"], a["beta2"], a["eps"], a["step"])
        for k, v in arrays.items():
            if k.startswith("adam/m/"):
                adam.m[k[len("adam/m/"):]] = v
            elif k.startswith("adam/v/"):
                adam.v[k[len("adam/v/"):]] = v
    return params, bn, adam, meta


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int,
                   dtype=np.float32) -> np.ndarray:
    lim = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-lim, lim, size=shape).astype(dtype)
