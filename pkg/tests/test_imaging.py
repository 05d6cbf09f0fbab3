from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from petrad.imaging import (EmptyMaskError, Patch, PreprocessedStudy, TumorTooLargeError,
                            Volume3D, VolumeError, VolumeInvariantError, clip_normalize,
                            load_preprocessed, mask_and_crop, preprocess_study, read_volume,
                            resample_isotropic, save_preprocessed, to_suv, write_volume)
from petrad.phantom import desk_spec, generate_study


def test_volume_round_trip(tmp_path):
    v = Volume3D(np.arange(24, dtype=np.float64).reshape(4, 3, 2), (0.5, 1.0, 2.5),
                 (1.0, -2.0, 3.0), "PET")
    write_volume(v, tmp_path / "a.vol")
    r = read_volume(tmp_path / "a.vol")
    assert r.dims == (4, 3, 2)
    assert r.spacing == v.spacing and r.origin == v.origin and r.modality == "PET"
    assert np.array_equal(r.voxels, v.voxels)


def test_payload_is_x_fastest(tmp_path):
    v = Volume3D(np.arange(24, dtype=np.float32).reshape(4, 3, 2), modality="CT")
    write_volume(v, tmp_path / "a.vol")
    raw = (tmp_path / "a.vol").read_bytes()
    payload = np.frombuffer(raw[-24 * 4:], dtype="<f4")
    # x varies fastest: the first four values are v[0..3, 0, 0]
    assert payload[:4].tolist() == [0.0, 6.0, 12.0, 18.0]


def test_size_mismatch_rejected(tmp_path):
    v = Volume3D(np.zeros((2, 2, 2)), modality="CT")
    write_volume(v, tmp_path / "a.vol")
    data = (tmp_path / "a.vol").read_bytes()
    (tmp_path / "b.vol").write_bytes(data[:-4])  # 7 payload values
    with pytest.raises(VolumeError, match="payload"):
        read_volume(tmp_path / "b.vol")


def test_malformed_header(tmp_path):
    (tmp_path / "c.vol").write_bytes(b"PETRADVOL 1\n{not json\n")
    with pytest.raises(VolumeError):
        read_volume(tmp_path / "c.vol")


def test_mask_value_two_rejected(tmp_path):
    with pytest.raises(VolumeInvariantError):
        Volume3D(np.full((2, 2, 2), 2), modality="MASK")
    good = Volume3D(np.ones((2, 2, 2)), modality="MASK")
    write_volume(good, tmp_path / "m.vol")
    raw = bytearray((tmp_path / "m.vol").read_bytes())
    raw[-1] = 2
    (tmp_path / "m2.vol").write_bytes(bytes(raw))
    with pytest.raises(VolumeInvariantError):
        read_volume(tmp_path / "m2.vol")


@pytest.mark.parametrize("spacing", [(0.0, 1, 1), (1, -1, 1), (1, 1, float("inf"))])
def test_bad_spacing(spacing):
    with pytest.raises(VolumeInvariantError):
        Volume3D(np.zeros((2, 2, 2)), spacing)


def test_suv_unit_arithmetic():
    v = Volume3D(np.full((2, 2, 2), 5.0), modality="PET")
    suv = to_suv(v, 70.0, 370.0)
    assert np.allclose(suv.voxels, 5 * 70000 / 370000, rtol=1e-6)
    assert suv.modality == "PET-SUV"
    assert not to_suv(Volume3D(np.zeros((2, 2, 2)), modality="PET"), 70, 370).voxels.any()
    with pytest.raises(ValueError):
        to_suv(v, 0.0, 370.0)
    with pytest.raises(ValueError):
        to_suv(v, 70.0, -1.0)


@given(st.floats(0.01, 100))
@settings(max_examples=25, deadline=None)
def test_suv_linear(alpha):
    g = np.random.default_rng(0)
    c = g.random((3, 3, 3)) * 10
    a = to_suv(Volume3D(alpha * c, modality="PET"), 60, 400).voxels
    b = alpha * to_suv(Volume3D(c, modality="PET"), 60, 400).voxels
    assert np.allclose(a, b, rtol=1e-5)


def test_resample_identity():
    g = np.random.default_rng(1)
    v = Volume3D(g.random((5, 4, 3)), (1.0, 1.0, 1.0), modality="CT")
    r = resample_isotropic(v)
    assert r.dims == v.dims
    assert np.abs(r.voxels - v.voxels).max() < 1e-6


def test_resample_ramp_midpoint():
    v = Volume3D(np.array([0.0, 10.0]).reshape(2, 1, 1), (2.0, 1.0, 1.0), modality="CT")
    r = resample_isotropic(v)
    # the 4 mm extent gives samples at 0, 1, 2, 3 mm; beyond 2 mm clamps to the edge
    assert r.voxels[:, 0, 0].tolist() == [0.0, 5.0, 10.0, 10.0]


def test_resample_nearest_values():
    g = np.random.default_rng(2)
    m = Volume3D((g.random((5, 6, 4)) > 0.5).astype(np.uint8), (2.0, 1.5, 3.0), modality="MASK")
    r = resample_isotropic(m, "nearest")
    assert set(np.unique(r.voxels)) <= {0, 1}
    ct = Volume3D(g.integers(0, 5, (4, 4, 4)).astype(float), (2.0, 2.0, 2.0), modality="CT")
    rv = resample_isotropic(ct, "nearest")
    assert set(np.unique(rv.voxels)) <= set(np.unique(ct.voxels))


def test_crop_single_voxel():
    vol = Volume3D(np.arange(20 ** 3, dtype=float).reshape(20, 20, 20) + 1, modality="CT")
    m = np.zeros((20, 20, 20), dtype=np.uint8)
    m[10, 10, 10] = 1
    p = mask_and_crop(vol, Volume3D(m, modality="MASK"), (8, 8, 8))
    assert p.voxels[4, 4, 4] == vol.voxels[10, 10, 10]
    assert np.count_nonzero(p.voxels) == 1 and p.roi.sum() == 1


def test_crop_errors():
    vol = Volume3D(np.ones((10, 10, 10)), modality="CT")
    with pytest.raises(EmptyMaskError):
        mask_and_crop(vol, Volume3D(np.zeros((10, 10, 10)), modality="MASK"), (4, 4, 4))
    with pytest.raises(TumorTooLargeError):
        mask_and_crop(vol, Volume3D(np.ones((10, 10, 10)), modality="MASK"), (4, 4, 4))


def test_crop_full_mask_identity():
    g = np.random.default_rng(3)
    vol = Volume3D(g.random((6, 6, 4)), modality="CT")
    p = mask_and_crop(vol, Volume3D(np.ones((6, 6, 4)), modality="MASK"), (6, 6, 4))
    assert np.array_equal(p.voxels, vol.voxels.astype(np.float64))


def _patch(values):
    roi = np.ones(values.shape, dtype=bool)
    return Patch(values.astype(np.float64), roi, "CT")


def test_normalize_percentile_example():
    vals = np.arange(1, 101, dtype=float).reshape(10, 10, 1)
    out = clip_normalize(_patch(vals))
    assert out.voxels[4, 9, 0] == pytest.approx((50 - 5.95) / 89.1, abs=1e-12)  # value 50
    assert out.voxels[0, 0, 0] == 0.0 and out.voxels[9, 9, 0] == 1.0


def test_normalize_constant_and_background():
    vals = np.full((3, 3, 3), 4.0)
    assert (clip_normalize(_patch(vals)).voxels == 1.0).all()
    roi = np.zeros((3, 3, 3), dtype=bool)
    roi[1] = True
    out = clip_normalize(Patch(np.random.default_rng(0).random((3, 3, 3)), roi, "CT"))
    assert (out.voxels[~roi] == 0).all()


def test_normalize_scaled_mode():
    vals = np.arange(1, 11, dtype=float).reshape(10, 1, 1)
    out = clip_normalize(_patch(vals), hi_pct=95.0, mode="scaled")
    lo, hi = 0.95, 9.5
    assert np.allclose(out.voxels.ravel(), np.clip((vals.ravel() - lo) / (hi - lo), 0, 1))


@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=60))
@settings(max_examples=60, deadline=None)
def test_normalize_range_and_monotone(xs):
    vals = np.array(xs).reshape(-1, 1, 1)
    out = clip_normalize(_patch(vals)).voxels.ravel()
    assert out.min() >= 0 and out.max() <= 1
    order = np.argsort(vals.ravel(), kind="stable")
    assert (np.diff(out[order]) >= 0).all()


def test_preprocess_phantom_and_persistence(tmp_path):
    spec = desk_spec(n=4, seed=5)
    rec = generate_study(spec, 0, 1)
    s = preprocess_study(rec, (48, 48, 32))
    assert s.pet.dims == (48, 48, 32) and s.ct.dims == (48, 48, 32)
    assert np.array_equal(s.pet.roi, s.ct.roi)
    for p in (s.pet, s.ct):
        assert p.voxels.min() >= 0 and p.voxels.max() <= 1
        assert (p.voxels[~p.roi] == 0).all()
    save_preprocessed(s, tmp_path / "s.arc")
    back = load_preprocessed(tmp_path / "s.arc")
    assert isinstance(back, PreprocessedStudy)
    assert np.array_equal(back.pet.voxels, s.pet.voxels)
    assert np.array_equal(back.ct.voxels, s.ct.voxels)
    assert (back.tnm, back.label, back.study_id) == (s.tnm, s.label, s.study_id)


def test_centroid_rounds_half_up():
    vol = Volume3D(np.ones((10, 10, 10)), modality="CT")
    m = np.zeros((10, 10, 10), dtype=np.uint8)
    m[4:6, 4, 4] = 1  # centroid x = 4.5 -> 5
    p = mask_and_crop(vol, Volume3D(m, modality="MASK"), (4, 4, 4))
    assert p.offset[0] == 5 - 2
    assert math.isclose(p.roi.sum(), 2)
