"""Finite-difference checks shared by the autodiff tests and the acceptance run."""
from __future__ import annotations

import numpy as np

import oracles as O
from petrad import autodiff as ad


def _weighted(out: ad.Tensor, R: np.ndarray) -> ad.Tensor:
    # a random projection makes every output entry matter
    return ad.tsum(ad.mul(out, ad.Tensor(R)))


def _case_add(g):
    a, b = g.normal(size=(3, 4)), g.normal(size=(3, 4))
    R = g.normal(size=(3, 4))
    return {"a": a, "b": b}, lambda t: _weighted(ad.add(t["a"], t["b"]), R)


def _case_mul(g):
    a, b = g.normal(size=(2, 5)), g.normal(size=(2, 5))
    R = g.normal(size=(2, 5))
    return {"a": a, "b": b}, lambda t: _weighted(ad.mul(t["a"], t["b"]), R)


def _away_from_zero(g, shape):
    x = g.normal(size=shape)
    return np.where(np.abs(x) < 0.05, 0.1, x)


def _case_relu(g):
    x = _away_from_zero(g, (4, 6))
    R = g.normal(size=(4, 6))
    return {"x": x}, lambda t: _weighted(ad.relu(t["x"]), R)


def _case_elu(g):
    x = _away_from_zero(g, (4, 6))
    R = g.normal(size=(4, 6))
    return {"x": x}, lambda t: _weighted(ad.elu(t["x"]), R)


def _case_reshape(g):
    x = g.normal(size=(2, 3, 2, 2, 1))
    R = g.normal(size=(2, 12))
    return {"x": x}, lambda t: _weighted(ad.flatten(t["x"]), R)


def _case_concat(g):
    a, b = g.normal(size=(2, 3, 2)), g.normal(size=(2, 1, 2))
    R = g.normal(size=(2, 4, 2))
    return {"a": a, "b": b}, lambda t: _weighted(ad.concat([t["a"], t["b"]], axis=1), R)


def _case_dense(g):
    x, W, b = g.normal(size=(3, 5)), g.normal(size=(5, 2)), g.normal(size=2)
    R = g.normal(size=(3, 2))
    return {"x": x, "W": W, "b": b}, lambda t: _weighted(ad.dense(t["x"], t["W"], t["b"]), R)


def _case_dropout(g):
    x = g.normal(size=(3, 8))
    R = g.normal(size=(3, 8))
    return {"x": x}, lambda t: _weighted(ad.dropout(t["x"], 0.4, (7, "layer", 3), True), R)


def _case_bn_train(g):
    x = g.normal(size=(3, 2, 2, 2, 2)) * 2 + 1
    gamma, beta = g.normal(size=2), g.normal(size=2)
    R = g.normal(size=x.shape)

    def f(t):
        st = ad.BatchNormState.create(2, np.float64)
        return _weighted(ad.batch_norm(t["x"], t["gamma"], t["beta"], st, True), R)
    return {"x": x, "gamma": gamma, "beta": beta}, f


def _case_bn_eval(g):
    x = g.normal(size=(2, 3, 2, 1, 2))
    gamma, beta = g.normal(size=3), g.normal(size=3)
    st = ad.BatchNormState(g.normal(size=3), g.uniform(0.5, 2, size=3))
    R = g.normal(size=x.shape)
    return ({"x": x, "gamma": gamma, "beta": beta},
            lambda t: _weighted(ad.batch_norm(t["x"], t["gamma"], t["beta"], st, False), R))


def _case_xent(g):
    z = g.normal(size=(5, 2)) * 2
    y = g.integers(0, 2, 5)
    cw = g.uniform(0.5, 2, size=2)
    return {"z": z}, lambda t: ad.softmax_xent(t["z"], y, cw)[0]


def _conv_case(stride, kshape):
    def case(g):
        x = g.normal(size=(2, 3, 5, 5, 4))
        w = g.normal(size=(2, 3) + kshape) * 0.5
        b = g.normal(size=2)
        n_out = tuple(-(-d // stride) for d in (5, 5, 4))
        R = g.normal(size=(2, 2) + n_out)
        return ({"x": x, "w": w, "b": b},
                lambda t: _weighted(ad.conv3d(t["x"], t["w"], t["b"], stride=stride, tz_max=2), R))
    return case


OP_CASES = {
    "add": _case_add, "mul": _case_mul, "relu": _case_relu, "elu": _case_elu,
    "reshape": _case_reshape, "concat": _case_concat, "dense": _case_dense,
    "dropout": _case_dropout, "batch_norm_train": _case_bn_train,
    "batch_norm_eval": _case_bn_eval, "softmax_xent": _case_xent,
    "conv3d_s1_k3": _conv_case(1, (3, 3, 3)), "conv3d_s2_k5": _conv_case(2, (5, 5, 3)),
    "conv3d_s2_k2": _conv_case(2, (2, 3, 4)),
}


def check_op(name: str, seed: int) -> float:
    """Worst relative error between analytic and numeric gradients over all inputs."""
    arrays, f = OP_CASES[name](np.random.default_rng(seed))
    tensors = {k: ad.Tensor(v, requires_grad=True) for k, v in arrays.items()}
    loss = f(tensors)
    ad.backward(loss)
    worst = 0.0
    for k, t in tensors.items():
        data = t.data

        def value():
            fresh = {kk: ad.Tensor(tt.data) for kk, tt in tensors.items()}
            return float(f(fresh).data)
        num = O.numeric_grad(value, data)
        worst = max(worst, O.grad_rel_err(t.grad, num))
    return worst


def check_network(seed: int, variant: str = "PCT", per_tensor: int = 2) -> float:
    """Full tiny network (16^3 input, alpha 1/16) in double precision, train mode.

    Every parameter tensor contributes ``per_tensor`` randomly chosen entries
    to the central-difference comparison.
    """
    from petrad.dlr import DlrArchSpec, build

    g = np.random.default_rng(seed)
    spec = DlrArchSpec(variant, (16, 16, 16), 1 / 16, dropout=0.3)
    net = build(spec, seed, np.float64)
    images = {b: g.random((3, 16, 16, 16)) for b in spec.branches}
    tnm = np.array([0.0, 1.0, 1.0])
    y = np.array([0, 1, 0])

    def loss_value():
        logits = net.forward(images, tnm, train=True, key=(seed, 0))
        return ad.softmax_xent(logits, y)[0]

    ad.zero_grads(net.params)
    ad.backward(loss_value())
    worst = 0.0
    for name, p in sorted(net.params.items()):
        flat = p.data.reshape(-1)
        picks = g.choice(flat.size, size=min(per_tensor, flat.size), replace=False)
        ana = p.grad.reshape(-1)[picks]
        num = np.empty(len(picks))
        for j, i in enumerate(picks):
            old = flat[i]
            flat[i] = old + 1e-6
            hi = float(loss_value().data)
            flat[i] = old - 1e-6
            lo = float(loss_value().data)
            flat[i] = old
            num[j] = (hi - lo) / 2e-6
        # scaled by the tensor's largest gradient; biases feeding batch norm have
        # an identically zero gradient, so the floor turns those into absolute checks
        scale = max(float(np.abs(p.grad).max()), float(np.abs(num).max()), 1e-4)
        worst = max(worst, float(np.abs(ana - num).max()) / scale)
    return worst
