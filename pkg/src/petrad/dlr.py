"""Two-branch 3D CNN on PET/CT patches with an optional TNM input.

Per image branch: five conv -> batch norm -> ELU blocks (16, 32, 64, 128,
256 filters; kernels 5, 3, 3, 3, 3; stride 2 from the second block on).
The branch outputs are concatenated on the channel axis and fused by a
768-filter conv block, flattened and passed through three ReLU + dropout
dense layers (1024, 512, 256). The TNM scalar joins after the third dense
layer, and a final dense layer gives two logits. Widths scale by ``alpha``.
"""
from __future__ import annotations

import concurrent.futures as cf
import csv
import logging
import math
import multiprocessing as mp
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from . import rng as rngmod
from .harness import METRICS, evaluate_scores, summarize
from .imaging import PreprocessedStudy
from .phantom import split_indices

log = logging.getLogger(__name__)

_BLAS_VARS = ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS")
VARIANTS = ("PCT", "PC", "PT", "CT")
BRANCH_FILTERS = (16, 32, 64, 128, 256)
BRANCH_KERNELS = (5, 3, 3, 3, 3)
BRANCH_STRIDES = (1, 2, 2, 2, 2)
FUSION_FILTERS = 768
FUSION_KERNEL = 3
DENSE_UNITS = (1024, 512, 256)


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class DlrArchSpec:
    variant: str = "PCT"
    input_dims: tuple[int, int, int] = (80, 80, 64)
    alpha: float = 1.0
    dropout: float = 0.5

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        object.__setattr__(self, "input_dims", tuple(int(d) for d in self.input_dims))
        if len(self.input_dims) != 3 or any(d < 16 or d % 16 for d in self.input_dims):
            raise GeometryError(
                f"input dims {self.input_dims} must be positive multiples of 16 so that four "
                "stride-2 blocks give integer feature maps")

    @property
    def branches(self) -> tuple[str, ...]:
        return {"PCT": ("pet", "ct"), "PC": ("pet", "ct"), "PT": ("pet",),
                "CT": ("ct",)}[self.variant]

    @property
    def uses_tnm(self) -> bool:
        return self.variant != "PC"

    def width(self, c: int) -> int:
        return max(1, int(math.ceil(c * self.alpha - 1e-9)))


@dataclass(frozen=True)
class LayerInfo:
    name: str
    kind: str
    in_shape: tuple
    out_shape: tuple
    n_params: int


def layer_table(spec: DlrArchSpec) -> list[LayerInfo]:
    """Per-layer shapes (channels first, batch omitted) by shape arithmetic."""
    rows = []
    dims = spec.input_dims
    branch_out = None
    for br in spec.branches:
        c_in, d = 1, dims
        for i, (f, k, s) in enumerate(zip(BRANCH_FILTERS, BRANCH_KERNELS, BRANCH_STRIDES)):
            c = spec.width(f)
            d_out = tuple(-(-n // s) for n in d)
            rows.append(LayerInfo(f"{br}_conv{i + 1}", "conv", (c_in, *d), (c, *d_out),
                                  c * c_in * k ** 3 + c + 2 * c))
            c_in, d = c, d_out
        branch_out = (c_in, d)
    c_cat = branch_out[0] * len(spec.branches)
    d = branch_out[1]
    c6 = spec.width(FUSION_FILTERS)
    rows.append(LayerInfo("conv6", "conv", (c_cat, *d), (c6, *d),
                          c6 * c_cat * FUSION_KERNEL ** 3 + 3 * c6))
    flat = c6 * d[0] * d[1] * d[2]
    rows.append(LayerInfo("flatten", "flatten", (c6, *d), (flat,), 0))
    n_in = flat
    for i, u in enumerate(DENSE_UNITS):
        w = spec.width(u)
        rows.append(LayerInfo(f"fc{i + 1}", "dense", (n_in,), (w,), n_in * w + w))
        n_in = w
    if spec.uses_tnm:
        rows.append(LayerInfo("tnm_concat", "concat", (n_in,), (n_in + 1,), 0))
        n_in += 1
    rows.append(LayerInfo("fc4", "dense", (n_in,), (2,), n_in * 2 + 2))
    return rows


# ------------------------------------------------------------------ network

class Network:
    """Parameters, batch-norm state and the forward graph of one variant."""

    def __init__(self, spec: DlrArchSpec, params: dict, bn: dict):
        self.spec = spec
        self.params = params
        self.bn = bn
        self.census = layer_table(spec)

    @property
    def dtype(self):
        return next(iter(self.params.values())).data.dtype

    def _conv_block(self, h, name, stride, train):
        p = self.params
        h = ad.conv3d(h, p[f"{name}.w"], p[f"{name}.b"], stride)
        h = ad.batch_norm(h, p[f"{name}.gamma"], p[f"{name}.beta"], self.bn[name], train)
        return ad.elu(h)

    def forward(self, images: dict, tnm=None, train: bool = False, key: tuple = (0, 0)):
        """Logits for a batch. ``images`` maps 'pet'/'ct' to (N, X, Y, Z)
        arrays; ``key`` = (seed, step) keys the dropout masks."""
        spec = self.spec
        feats = []
        for br in spec.branches:
            if br not in images:
                raise ValueError(f"variant {spec.variant} needs a {br!r} input")
            arr = np.asarray(images[br], dtype=self.dtype)
            if arr.shape[1:] != spec.input_dims:
                raise GeometryError(f"{br} input {arr.shape[1:]} != trained dims {spec.input_dims}")
            h = ad.Tensor(arr[:, None], name=f"input:{br}")
            for i, s in enumerate(BRANCH_STRIDES):
                h = self._conv_block(h, f"{br}_conv{i + 1}", s, train)
            feats.append(h)
        h = ad.concat(feats, axis=1) if len(feats) > 1 else feats[0]
        h = self._conv_block(h, "conv6", 1, train)
        h = ad.flatten(h)
        p = self.params
        for i in range(len(DENSE_UNITS)):
            name = f"fc{i + 1}"
            h = ad.relu(ad.dense(h, p[f"{name}.w"], p[f"{name}.b"]))
            h = ad.dropout(h, spec.dropout, (*key, name), train)
        if spec.uses_tnm:
            if tnm is None:
                raise ValueError(f"variant {spec.variant} needs the TNM input")
            t = np.asarray(tnm, dtype=self.dtype).reshape(-1, 1)
            h = ad.concat([h, ad.Tensor(t, name="input:tnm")], axis=1)
        return ad.dense(h, p["fc4.w"], p["fc4.b"])

    def predict_proba(self, images: dict, tnm=None, batch: int = 16) -> np.ndarray:
        n = len(next(iter(images.values())))
        out = []
        for lo in range(0, n, batch):
            sl = slice(lo, lo + batch)
            t = None if tnm is None else np.asarray(tnm)[sl]
            z = self.forward({k: v[sl] for k, v in images.items()}, t, train=False).data
            out.append(ad.softmax(z.astype(np.float64))[:, 1])
        return np.concatenate(out)

    def snapshot(self):
        return ({k: v.data.copy() for k, v in self.params.items()},
                {k: (s.mean.copy(), s.var.copy()) for k, s in self.bn.items()})

    def restore(self, snap) -> None:
        pdata, bdata = snap
        for k, v in pdata.items():
            self.params[k].data = v.copy()
        for k, (m, v) in bdata.items():
            self.bn[k].mean, self.bn[k].var = m.copy(), v.copy()

    def save(self, path, adam: ad.AdamState | None = None, meta: dict | None = None) -> None:
        info = {"kind": "dlr-network", "arch": {**asdict(self.spec),
                                                 "input_dims": list(self.spec.input_dims)}}
        info.update(meta or {})
        ad.save_checkpoint(path, self.params, self.bn, adam, info)

    @classmethod
    def load(cls, path) -> "Network":
        params, bn, _, meta = ad.load_checkpoint(path)
        if meta.get("kind") != "dlr-network":
            raise ValueError(f"{path}: not a network checkpoint")
        a = meta["arch"]
        spec = DlrArchSpec(a["variant"], tuple(a["input_dims"]), a["alpha"], a["dropout"])
        return cls(spec, params, bn)


def graph_inputs(out: ad.Tensor) -> list[str]:
    """Names of the data inputs (not parameters) reachable from ``out``."""
    seen, stack, names = set(), [out], []
    while stack:
        t = stack.pop()
        if id(t) in seen:
            continue
        seen.add(id(t))
        if t.name.startswith("input:"):
            names.append(t.name[len("input:"):])
        stack.extend(t.parents)
    return sorted(names)


def build(spec: DlrArchSpec, seed: int = 0, dtype=np.float32) -> Network:
    """Glorot-uniform weights (keyed by layer name), zero biases, unit BN scale."""
    params, bn = {}, {}

    def add_conv(name, c_out, c_in, k):
        g = rngmod.stream(seed, "init", name)
        fan_in, fan_out = c_in * k ** 3, c_out * k ** 3
        params[f"{name}.w"] = ad.glorot_uniform(g, (c_out, c_in, k, k, k), fan_in, fan_out, dtype)
        params[f"{name}.b"] = np.zeros(c_out, dtype=dtype)
        params[f"{name}.gamma"] = np.ones(c_out, dtype=dtype)
        params[f"{name}.beta"] = np.zeros(c_out, dtype=dtype)
        bn[name] = ad.BatchNormState.create(c_out, dtype)

    table = {r.name: r for r in layer_table(spec)}
    for br in spec.branches:
        for i, k in enumerate(BRANCH_KERNELS):
            r = table[f"{br}_conv{i + 1}"]
            add_conv(r.name, r.out_shape[0], r.in_shape[0], k)
    r = table["conv6"]
    add_conv("conv6", r.out_shape[0], r.in_shape[0], FUSION_KERNEL)
    for name in ("fc1", "fc2", "fc3", "fc4"):
        r = table[name]
        g = rngmod.stream(seed, "init", name)
        params[f"{name}.w"] = ad.glorot_uniform(g, (r.in_shape[0], r.out_shape[0]),
                                                r.in_shape[0], r.out_shape[0], dtype)
        params[f"{name}.b"] = np.zeros(r.out_shape[0], dtype=dtype)
    tensors = {k: ad.Tensor(v, requires_grad=True, name=k) for k, v in params.items()}
    return Network(spec, tensors, bn)


# ------------------------------------------------------------- augmentation

@dataclass(frozen=True)
class AugmentParams:
    shift: tuple[int, int, int] = (0, 0, 0)
    angle: float = 0.0                       # radians, about the z axis
    flips: tuple[bool, bool, bool] = (False, False, False)

    @property
    def is_identity(self) -> bool:
        return self.shift == (0, 0, 0) and self.angle == 0.0 and not any(self.flips)


def draw_augmentation(g: np.random.Generator, max_shift: int = 8,
                      rotation: str = "continuous") -> AugmentParams:
    shift = tuple(int(v) for v in g.integers(-max_shift, max_shift + 1, size=3))
    if rotation == "continuous":
        angle = float(g.uniform(0.0, 2.0 * math.pi))
    elif rotation == "right-angle":
        angle = float(g.integers(0, 4)) * math.pi / 2.0
    elif rotation == "none":
        angle = 0.0
    else:
        raise ValueError(f"unknown rotation mode {rotation!r}")
    flips = tuple(bool(v) for v in g.random(3) < 0.5)
    return AugmentParams(shift, angle, flips)


def rotate_z(vol: np.ndarray, angle: float, order: int = 1) -> np.ndarray:
    """Rotate about the z axis through the patch centre, zero outside.

    ``order`` 1 interpolates linearly in-plane (trilinear reduces to bilinear
    for a rotation about z); 0 takes the nearest voxel.
    """
    if angle == 0.0:
        return vol.copy()
    X, Y, _ = vol.shape
    quarter = angle / (math.pi / 2)
    if abs(quarter - round(quarter)) < 1e-12:
        return np.ascontiguousarray(np.rot90(vol, int(round(quarter)) % 4, axes=(0, 1))) \
            if X == Y else _rotate_sampled(vol, angle, order)
    return _rotate_sampled(vol, angle, order)


def _rotate_sampled(vol, angle, order):
    X, Y, Z = vol.shape
    cx, cy = (X - 1) / 2.0, (Y - 1) / 2.0
    ii, jj = np.meshgrid(np.arange(X) - cx, np.arange(Y) - cy, indexing="ij")
    c, s = math.cos(angle), math.sin(angle)
    # inverse map: output (i, j) samples the input at R(-angle) (i, j)
    xs = c * ii + s * jj + cx
    ys = -s * ii + c * jj + cy
    out = np.zeros_like(vol)
    if order == 0:
        xi, yi = np.floor(xs + 0.5).astype(int), np.floor(ys + 0.5).astype(int)
        ok = (xi >= 0) & (xi < X) & (yi >= 0) & (yi < Y)
        out[ok] = vol[xi[ok], yi[ok]]
        return out
    x0, y0 = np.floor(xs).astype(int), np.floor(ys).astype(int)
    fx, fy = (xs - x0)[..., None], (ys - y0)[..., None]
    for dx, dy, wgt in ((0, 0, (1 - fx) * (1 - fy)), (1, 0, fx * (1 - fy)),
                        (0, 1, (1 - fx) * fy), (1, 1, fx * fy)):
        xi, yi = x0 + dx, y0 + dy
        ok = (xi >= 0) & (xi < X) & (yi >= 0) & (yi < Y)
        contrib = np.zeros_like(vol)
        contrib[ok] = vol[xi[ok], yi[ok]]
        out += (wgt * contrib).astype(vol.dtype)
    return out


def shift_zero(vol: np.ndarray, shift) -> np.ndarray:
    """Integer translation with zero fill."""
    out = np.zeros_like(vol)
    src, dst = [], []
    for n, s in zip(vol.shape, shift):
        if abs(s) >= n:
            return out
        src.append(slice(max(-s, 0), n - max(s, 0)))
        dst.append(slice(max(s, 0), n - max(-s, 0)))
    out[tuple(dst)] = vol[tuple(src)]
    return out


def apply_augmentation(vol: np.ndarray, p: AugmentParams, order: int = 1) -> np.ndarray:
    if p.is_identity:
        return vol.copy()
    out = rotate_z(vol, p.angle, order)
    out = shift_zero(out, p.shift)
    for axis, f in enumerate(p.flips):
        if f:
            out = np.flip(out, axis=axis)
    return np.ascontiguousarray(out)


def augment(pet: np.ndarray, ct: np.ndarray, g: np.random.Generator, max_shift: int = 8,
            rotation: str = "continuous"):
    """One transform draw applied to both patches."""
    if pet.shape != ct.shape:
        raise ValueError("PET and CT patches must share dimensions")
    p = draw_augmentation(g, max_shift, rotation)
    return apply_augmentation(pet, p), apply_augmentation(ct, p)


# ----------------------------------------------------------------- training

@dataclass
class TrainConfig:
    batch_size: int = 32
    lr: float = 1e-4
    max_epochs: int = 100
    patience: int = 10
    min_delta: float = 1e-4
    augment: bool = True
    rotation: str = "continuous"
    max_shift: int = 8
    class_weighted: bool = False
    seed: int = 0
    max_steps: int | None = None

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch size must be at least 1")
        if self.max_epochs < 1 or self.patience < 1:
            raise ValueError("max_epochs and patience must be positive")


@dataclass
class TrainedDlr:
    network: Network
    history: list               # per-epoch dicts: epoch, loss, steps
    best_epoch: int
    step_losses: list = field(default_factory=list)


def stack_inputs(studies: list[PreprocessedStudy], spec: DlrArchSpec):
    images = {}
    if "pet" in spec.branches:
        images["pet"] = np.stack([s.pet.voxels for s in studies]).astype(np.float32)
    if "ct" in spec.branches:
        images["ct"] = np.stack([s.ct.voxels for s in studies]).astype(np.float32)
    tnm = np.array([s.tnm for s in studies], dtype=np.float64) if spec.uses_tnm else None
    labels = np.array([s.label for s in studies], dtype=np.int64)
    return images, tnm, labels


def train(studies: list[PreprocessedStudy], arch: DlrArchSpec, cfg: TrainConfig,
          dtype=np.float32, progress: bool = False) -> TrainedDlr:
    """Adam on shuffled mini-batches with fresh augmentation per batch.

    Stops once the epoch training loss has not improved by ``min_delta`` for
    ``patience`` epochs (or at ``max_epochs``) and returns the parameters of
    the best epoch.
    """
    n = len(studies)
    if n < 2:
        raise ValueError("training needs at least two studies")
    for s in studies:
        if s.pet.voxels.shape != arch.input_dims:
            raise GeometryError(f"study {s.study_id} has patch {s.pet.voxels.shape}, "
                                f"architecture expects {arch.input_dims}")
    bs = cfg.batch_size
    if n < bs:
        log.warning("cohort of %d is smaller than one batch; batch size shrinks to %d", n, n)
        bs = n
    net = build(arch, rngmod.child_seed(cfg.seed, "dlr-init"), dtype)
    images, tnm, labels = stack_inputs(studies, arch)
    weights = None
    if cfg.class_weighted:
        counts = np.bincount(labels, minlength=2).astype(np.float64)
        weights = counts.sum() / (2.0 * np.maximum(counts, 1.0))
    adam = ad.AdamState(lr=cfg.lr)
    history, step_losses = [], []
    best, best_loss, best_epoch, stale, step = None, np.inf, -1, 0, 0
    for epoch in range(cfg.max_epochs):
        order = rngmod.stream(cfg.seed, "dlr-shuffle", epoch).permutation(n)
        tot, seen = 0.0, 0
        for lo in range(0, n, bs):
            idx = order[lo:lo + bs]
            batch = {}
            for k, arr in images.items():
                batch[k] = arr[idx].copy()
            if cfg.augment:
                for j, i in enumerate(idx):
                    g = rngmod.stream(cfg.seed, "augment", epoch, lo + j)
                    p = draw_augmentation(g, cfg.max_shift, cfg.rotation)
                    for k in batch:
                        batch[k][j] = apply_augmentation(batch[k][j], p)
            t = None if tnm is None else tnm[idx]
            logits = net.forward(batch, t, train=True, key=(cfg.seed, step))
            loss, _ = ad.softmax_xent(logits, labels[idx], weights)
            ad.zero_grads(net.params)
            ad.backward(loss)
            ad.adam_step(net.params, adam)
            step += 1
            lv = float(loss.data)
            step_losses.append(lv)
            tot += lv * len(idx)
            seen += len(idx)
            if cfg.max_steps is not None and step >= cfg.max_steps:
                break
        ep_loss = tot / seen
        history.append({"epoch": epoch, "loss": ep_loss, "steps": step})
        if progress:
            log.info("%s epoch %d loss %.5f", arch.variant, epoch, ep_loss)
        if ep_loss < best_loss - cfg.min_delta:
            best_loss, best_epoch, stale = ep_loss, epoch, 0
            best = net.snapshot()
        else:
            stale += 1
        if stale >= cfg.patience or (cfg.max_steps is not None and step >= cfg.max_steps):
            break
    if best is not None:
        net.restore(best)
    return TrainedDlr(net, history, best_epoch, step_losses)


def write_loss_curve(model: TrainedDlr, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "loss", "steps"])
        for h in model.history:
            w.writerow([h["epoch"], repr(float(h["loss"])), h["steps"]])


def predict(model: TrainedDlr | Network, studies) -> np.ndarray:
    """Probability of class 1 for each study (no augmentation)."""
    net = model.network if isinstance(model, TrainedDlr) else model
    if isinstance(studies, PreprocessedStudy):
        studies = [studies]
    for s in studies:
        if s.pet.voxels.shape != net.spec.input_dims:
            raise GeometryError(f"study {s.study_id} has patch {s.pet.voxels.shape}, "
                                f"model was trained on {net.spec.input_dims}")
    images, tnm, _ = stack_inputs(list(studies), net.spec)
    return net.predict_proba(images, tnm)


# --------------------------------------------------------------- evaluation

@dataclass
class VariantReport:
    config: dict
    rows: list          # per (variant, repeat)
    aggregate: list     # per variant

    def mean_auc(self, variant: str) -> float:
        for a in self.aggregate:
            if a["variant"] == variant:
                return a["auc"]["mean"]
        raise KeyError(variant)

    def to_json(self) -> dict:
        return {"config": self.config, "rows": self.rows, "aggregate": self.aggregate}


_WORKER_STUDIES: list = []


def _init_worker(studies) -> None:
    global _WORKER_STUDIES
    _WORKER_STUDIES = studies


def _variant_unit(args) -> dict:
    r, v, tr, va, arch, cfg, seed, studies = args
    studies = studies if studies is not None else _WORKER_STUDIES
    train_set = [studies[i] for i in tr]
    valid_set = [studies[i] for i in va]
    yva = np.array([s.label for s in valid_set])
    spec = DlrArchSpec(v, arch.input_dims, arch.alpha, arch.dropout)
    run_cfg = TrainConfig(**{**asdict(cfg), "seed": rngmod.child_seed(seed, "dlr", r, v)})
    row = {"variant": v, "repeat": r}
    try:
        model = train(train_set, spec, run_cfg)
        prob = predict(model, valid_set)
        m = evaluate_scores(prob, (prob >= 0.5).astype(np.int64), yva)
        row.update({"status": "ok", "message": "", "best_epoch": model.best_epoch,
                    "epochs": len(model.history), **{k: float(m[k]) for k in METRICS}})
    except Exception as exc:  # noqa: BLE001 - recorded, aggregation skips it
        log.warning("variant %s repeat %d failed: %s", v, r, exc)
        row.update({"status": "failed", "message": f"{type(exc).__name__}: {exc}",
                    **{k: None for k in METRICS}})
    return row


def evaluate_variants(studies: list[PreprocessedStudy], n_train: int, n_valid: int,
                      n_repeats: int = 10, variants=VARIANTS, arch: DlrArchSpec | None = None,
                      cfg: TrainConfig | None = None, seed: int = 0, threads: int = 1,
                      progress: bool = False) -> VariantReport:
    """Train each variant on repeated random splits and score the validation part.

    Every (repeat, variant) run draws from its own keyed seed, so rows do not
    depend on ``threads``.
    """
    arch = arch or DlrArchSpec()
    cfg = cfg or TrainConfig()
    units = []
    for r in range(n_repeats):
        tr, va = split_indices(len(studies), n_train, n_valid, r, seed)
        units.extend((r, v, tr, va, arch, cfg, seed) for v in variants)
    if threads <= 1:
        rows = []
        for u in units:
            rows.append(_variant_unit((*u, studies)))
            if progress:
                log.info("repeat %d %s auc=%s", u[0], u[1], rows[-1]["auc"])
    else:
        saved = {k: os.environ.get(k) for k in _BLAS_VARS}
        os.environ.update({k: "1" for k in saved})
        try:
            with cf.ProcessPoolExecutor(threads, mp_context=mp.get_context("spawn"),
                                        initializer=_init_worker,
                                        initargs=(list(studies),)) as ex:
                rows = list(ex.map(_variant_unit, [(*u, None) for u in units]))
        finally:
            for k, val in saved.items():
                if val is None:
                    os.environ.pop(k, None)
                else:
                    os.environ[k] = val
    agg = []
    for v in variants:
        ok = [x for x in rows if x["variant"] == v and x["status"] == "ok"]
        agg.append({"variant": v, "n_ok": len(ok),
                    **{k: summarize([x[k] for x in ok]) for k in METRICS}})
    config = {"n_train": n_train, "n_valid": n_valid, "n_repeats": n_repeats, "seed": seed,
              "variants": list(variants),
              "arch": {**asdict(arch), "input_dims": list(arch.input_dims)},
              "train": asdict(cfg)}
    return VariantReport(config, rows, agg)


def write_variant_table(report: VariantReport, path) -> None:
    """Mean (sd) [q25, q75] per variant and metric, one row per variant."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variant", *(f"{m}_{s}" for m in METRICS for s in ("mean", "sd", "q25", "q75"))])
        for a in report.aggregate:
            vals = []
            for m in METRICS:
                for s in ("mean", "sd", "q25", "q75"):
                    v = a[m][s]
                    vals.append("" if v is None else repr(float(v)))
            w.writerow([a["variant"], *vals])
