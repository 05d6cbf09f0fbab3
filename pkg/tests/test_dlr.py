from __future__ import annotations

import csv
import logging
import math

import numpy as np
import pytest

from gradsuite import check_network
from petrad import autodiff as ad
from petrad import rng as rngmod
from petrad.dlr import (AugmentParams, DlrArchSpec, GeometryError, Network, TrainConfig,
                        apply_augmentation, augment, build, draw_augmentation,
                        evaluate_variants, graph_inputs, layer_table, predict, shift_zero,
                        train, write_loss_curve, write_variant_table)
from petrad.imaging import Patch, PreprocessedStudy, preprocess_study
from petrad.metrics import auc
from petrad.phantom import desk_spec, generate_cohort


def _fake_studies(n, dims=(16, 16, 16), seed=0):
    g = np.random.default_rng(seed)
    out = []
    roi = np.ones(dims, bool)
    for i in range(n):
        label = i % 2
        pet = g.random(dims) * 0.5 + 0.5 * label
        out.append(PreprocessedStudy(f"S{i}", Patch(pet, roi, "PET-SUV"),
                                     Patch(g.random(dims), roi, "CT"), int(g.integers(0, 2)), label))
    return out


# ------------------------------------------------------------ architecture

def test_layer_census_full_size():
    t = {r.name: r for r in layer_table(DlrArchSpec("PCT", (80, 80, 64), 1.0))}
    dims = [t[f"pet_conv{i}"].out_shape[1:] for i in range(1, 6)]
    assert dims == [(80, 80, 64), (40, 40, 32), (20, 20, 16), (10, 10, 8), (5, 5, 4)]
    assert t["conv6"].in_shape[0] == 512 and t["conv6"].out_shape == (768, 5, 5, 4)
    assert t["flatten"].out_shape == (768 * 100,)
    assert t["fc4"].in_shape == (257,) and t["fc4"].out_shape == (2,)


@pytest.mark.parametrize("alpha", [1 / 16, 0.25, 0.3])
@pytest.mark.parametrize("dims", [(16, 16, 16), (32, 16, 48)])
def test_built_shapes_match_table(alpha, dims):
    spec = DlrArchSpec("PCT", dims, alpha)
    net = build(spec, 0)
    t = {r.name: r for r in layer_table(spec)}
    assert net.params["conv6.w"].shape[:2] == (t["conv6"].out_shape[0], t["conv6"].in_shape[0])
    assert net.params["fc1.w"].shape == (t["flatten"].out_shape[0], t["fc1"].out_shape[0])
    z = net.forward({"pet": np.zeros((2, *dims)), "ct": np.zeros((2, *dims))}, [0, 1])
    assert z.shape == (2, 2)
    assert spec.width(768) == math.ceil(768 * alpha)


def test_variant_inputs():
    imgs = {"pet": np.zeros((1, 16, 16, 16)), "ct": np.zeros((1, 16, 16, 16))}
    for v, expect in (("PCT", ["ct", "pet", "tnm"]), ("PC", ["ct", "pet"]),
                      ("PT", ["pet", "tnm"]), ("CT", ["ct", "tnm"])):
        net = build(DlrArchSpec(v, (16, 16, 16), 1 / 16), 0)
        assert graph_inputs(net.forward(imgs, [1.0] if v != "PC" else None)) == expect
    t = {r.name: r for r in layer_table(DlrArchSpec("PT", (48, 48, 32), 0.25))}
    assert t["conv6"].in_shape[0] == 64 and not any(k.startswith("ct_") for k in t)


def test_pc_equals_pct_without_tnm_weights():
    spec = DlrArchSpec("PCT", (16, 16, 16), 1 / 8)
    pct = build(spec, 4, np.float64)
    pc = build(DlrArchSpec("PC", (16, 16, 16), 1 / 8), 4, np.float64)
    for k, p in pct.params.items():
        pc.params[k].data = p.data[:-1].copy() if k == "fc4.w" else p.data.copy()
    pct.params["fc4.w"].data[-1] = 0.0
    g = np.random.default_rng(1)
    imgs = {"pet": g.random((3, 16, 16, 16)), "ct": g.random((3, 16, 16, 16))}
    a = pct.forward(imgs, [0.0, 1.0, 1.0]).data
    b = pc.forward(imgs).data
    assert np.allclose(a, b, rtol=0, atol=1e-12)


def test_geometry_errors():
    with pytest.raises(GeometryError):
        DlrArchSpec("PCT", (40, 40, 32))
    net = build(DlrArchSpec("PT", (16, 16, 16), 1 / 16), 0)
    with pytest.raises(GeometryError):
        predict(net, _fake_studies(2, (32, 16, 16)))
    with pytest.raises(ValueError):
        net.forward({"pet": np.zeros((1, 16, 16, 16))})   # TNM missing


@pytest.mark.parametrize("seed", range(5))
def test_full_network_gradient(seed):
    assert check_network(seed) < 1e-4


# ------------------------------------------------------------ augmentation

def test_identity_augmentation():
    vol = np.random.default_rng(0).random((8, 8, 6))
    assert np.array_equal(apply_augmentation(vol, AugmentParams()), vol)


def test_shift_inverse_on_interior():
    vol = np.zeros((32, 16, 16))
    vol[10:20, 4:12, 4:12] = np.random.default_rng(1).random((10, 8, 8))
    back = shift_zero(shift_zero(vol, (8, 0, 0)), (-8, 0, 0))
    assert np.array_equal(back, vol)


def test_right_angle_rotation_is_exact():
    vol = np.random.default_rng(2).random((6, 6, 3))
    out = apply_augmentation(vol, AugmentParams(angle=math.pi / 2))
    assert np.array_equal(out, np.rot90(vol, 1, axes=(0, 1)))


def test_pairing_and_determinism():
    g = np.random.default_rng(3)
    pet = g.random((16, 16, 8))
    a = augment(pet, pet.copy(), rngmod.stream(5, "aug"))
    b = augment(pet, pet.copy(), rngmod.stream(5, "aug"))
    assert np.array_equal(a[0], a[1])          # same transform on both modalities
    assert np.array_equal(a[0], b[0])
    p = draw_augmentation(rngmod.stream(5, "x"), 8, "right-angle")
    assert round(p.angle / (math.pi / 2)) * (math.pi / 2) == p.angle
    assert all(-8 <= s <= 8 for s in p.shift)


# ---------------------------------------------------------------- training

def test_probabilities_and_determinism(tmp_path):
    studies = _fake_studies(6)
    arch = DlrArchSpec("PCT", (16, 16, 16), 1 / 16)
    cfg = TrainConfig(batch_size=3, max_epochs=2, lr=1e-3)
    a = train(studies, arch, cfg)
    b = train(studies, arch, cfg)
    assert a.step_losses == b.step_losses and len(a.step_losses) == 4
    p = predict(a, studies)
    assert ((p > 0) & (p < 1)).all()
    imgs = {"pet": np.stack([s.pet.voxels for s in studies]),
            "ct": np.stack([s.ct.voxels for s in studies])}
    probs = ad.softmax(a.network.forward(imgs, [s.tnm for s in studies]).data.astype(float))
    assert np.abs(probs.sum(axis=1) - 1).max() < 1e-6
    a.network.save(tmp_path / "m.arc")
    back = Network.load(tmp_path / "m.arc")
    assert np.array_equal(predict(back, studies), p)
    write_loss_curve(a, tmp_path / "loss.csv")
    assert len(list(csv.reader(open(tmp_path / "loss.csv")))) == 3


def test_small_cohort_shrinks_batch(caplog):
    with caplog.at_level(logging.WARNING, logger="petrad.dlr"):
        m = train(_fake_studies(4), DlrArchSpec("PT", (16, 16, 16), 1 / 16),
                  TrainConfig(batch_size=32, max_epochs=1))
    assert "batch size shrinks to 4" in caplog.text
    assert m.history[0]["steps"] == 1


def test_variant_report_schema(tmp_path):
    studies = _fake_studies(12)
    rep = evaluate_variants(studies, 8, 4, n_repeats=2, arch=DlrArchSpec(alpha=1 / 16,
                            input_dims=(16, 16, 16)), cfg=TrainConfig(batch_size=4, max_epochs=1))
    assert [a["variant"] for a in rep.aggregate] == ["PCT", "PC", "PT", "CT"]
    assert len(rep.rows) == 8 and all(r["status"] == "ok" for r in rep.rows)
    write_variant_table(rep, tmp_path / "v.csv")
    header = next(csv.reader(open(tmp_path / "v.csv")))
    for m in ("auc", "error", "precision", "recall", "f1"):
        assert f"{m}_mean" in header
    again = evaluate_variants(studies, 8, 4, n_repeats=2, arch=DlrArchSpec(
        alpha=1 / 16, input_dims=(16, 16, 16)), cfg=TrainConfig(batch_size=4, max_epochs=1),
        threads=2)
    assert again.to_json() == rep.to_json()


@pytest.fixture(scope="module")
def desk_studies():
    recs = generate_cohort(desk_spec(n=100, seed=2, prevalence=0.5))
    return [preprocess_study(r, (48, 48, 32)) for r in recs]


def test_overfit_sixteen_studies(desk_studies):
    m = train(desk_studies[:16], DlrArchSpec("PCT", (48, 48, 32), 0.25),
              TrainConfig(batch_size=16, augment=False, max_epochs=70, patience=70, max_steps=70))
    assert min(m.step_losses) < 0.05


def test_permuted_labels_null(desk_studies):
    g = np.random.default_rng(0)
    perm = g.permutation([s.label for s in desk_studies])
    shuffled = [PreprocessedStudy(s.study_id, s.pet, s.ct, s.tnm, int(y))
                for s, y in zip(desk_studies, perm)]
    tr, va = shuffled[:60], shuffled[60:]
    m = train(tr, DlrArchSpec("PC", (48, 48, 32), 0.25), TrainConfig(max_epochs=3, lr=1e-3))
    a = auc(predict(m, va), [s.label for s in va])
    assert 0.35 <= a <= 0.65
