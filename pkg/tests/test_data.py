import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from net3.data import (
    DatasetError,
    NetTensorTimeSeries,
    SynthConfig,
    compute_stats,
    denormalize,
    load_dataset,
    normalize,
    save_dataset,
    split_future,
    split_recovery,
    synthesize,
)
from net3.graph import ModeNetwork
from net3.tensor import hosvd, multi_mode_product

from conftest import random_network


def make_ds(rng, shape=(3, 2, 10), identity_modes=()):
    nets = [random_network(rng, n, identity=m in identity_modes) for m, n in enumerate(shape[:-1])]
    mask = rng.random(shape) < 0.8
    return NetTensorTimeSeries(rng.standard_normal(shape), nets, mask)


def test_round_trip_is_bit_identical(tmp_path, rng):
    ds = make_ds(rng, identity_modes=(1,))
    save_dataset(ds, tmp_path)
    assert not (tmp_path / "net_1.csv").exists()
    back = load_dataset(tmp_path)
    assert np.array_equal(back.values, ds.values)
    assert np.array_equal(back.mask, ds.mask)
    assert np.array_equal(back.networks[0].raw, ds.networks[0].raw)
    assert back.networks[1].is_identity
    assert back.mode_names == ds.mode_names


def test_payload_layout(tmp_path, rng):
    ds = make_ds(rng)
    save_dataset(ds, tmp_path)
    raw = np.frombuffer((tmp_path / "values.bin").read_bytes(), dtype="<f8")
    np.testing.assert_array_equal(raw, ds.values.ravel(order="C"))
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["shape"] == [3, 2, 10]


def test_motes_layout_manifest(tmp_path):
    shape = [54, 4, 2880]
    (tmp_path / "values.bin").write_bytes(np.zeros(shape).astype("<f8").tobytes())
    for m, n in enumerate(shape[:2]):
        np.savetxt(tmp_path / f"net_{m}.csv", np.ones((n, n)), delimiter=",")
    (tmp_path / "manifest").write_text(json.dumps({"shape": shape, "networks": {"0": "net_0.csv", "1": "net_1.csv"}}))
    ds = load_dataset(tmp_path)
    assert ds.node_shape == (54, 4) and ds.T == 2880
    assert ds.mask.all()
    assert [n.size for n in ds.networks] == [54, 4]


def test_load_validation_errors(tmp_path, rng):
    ds = make_ds(rng)
    save_dataset(ds, tmp_path)
    man = json.loads((tmp_path / "manifest.json").read_text())
    man["shape"] = [3, 2, 11]
    (tmp_path / "manifest.json").write_text(json.dumps(man))
    with pytest.raises(DatasetError):
        load_dataset(tmp_path)
    with pytest.raises(DatasetError):
        load_dataset(tmp_path / "missing")


def test_nonfinite_observed_values_rejected(rng):
    values = rng.standard_normal((2, 5))
    values[0, 1] = np.nan
    nets = [ModeNetwork.identity(2)]
    mask = np.ones((2, 5), dtype=bool)
    with pytest.raises(DatasetError):
        NetTensorTimeSeries(values, nets, mask)
    mask[0, 1] = False
    NetTensorTimeSeries(values, nets, mask)


def test_normalize_round_trip_and_constant_series(rng):
    ds = make_ds(rng)
    values = ds.values.copy()
    values[1, 1] = 4.0
    ds = ds.with_values(values)
    stats = compute_stats(ds)
    assert stats.constant[1, 1] and stats.std[1, 1] == 1.0
    norm = normalize(ds, stats)
    assert np.all(norm.values[1, 1] == 0.0)
    mean = np.where(ds.mask, norm.values, 0).sum(-1) / ds.mask.sum(-1)
    np.testing.assert_allclose(mean, 0.0, atol=1e-10)
    back = denormalize(norm, stats)
    np.testing.assert_allclose(back.values[ds.mask], ds.values[ds.mask], atol=1e-12)


def test_stats_use_training_region_only(rng):
    ds = make_ds(rng)
    train = np.zeros(ds.values.shape, dtype=bool)
    train[..., :5] = True
    stats = compute_stats(ds, train)
    use = ds.mask & train
    expected = np.where(use, ds.values, 0).sum(-1) / use.sum(-1)
    np.testing.assert_allclose(stats.mean, expected, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 0.99), st.integers(0, 1000))
def test_split_recovery_exact_count(fraction, seed):
    ds = NetTensorTimeSeries(np.zeros((4, 25)), [ModeNetwork.identity(4)], np.ones((4, 25), bool))
    test = split_recovery(ds, fraction, seed)
    assert test.sum() == int(np.floor(fraction * 100 + 0.5))
    assert np.array_equal(test, split_recovery(ds, fraction, seed))


def test_split_recovery_half_and_errors(caplog):
    ds = NetTensorTimeSeries(np.zeros((4, 25)), [ModeNetwork.identity(4)], np.ones((4, 25), bool))
    assert split_recovery(ds, 0.5, 0).sum() == 50
    with pytest.raises(ValueError, match="empty"):
        split_recovery(ds, 0.0, 0)
    with pytest.raises(ValueError):
        split_recovery(ds, 1.5, 0)
    tiny = NetTensorTimeSeries(np.zeros((2, 1)), [ModeNetwork.identity(2)], np.ones((2, 1), bool))
    split_recovery(tiny, 0.5, 0)
    assert "no observed training entries" in caplog.text


def test_split_future():
    ds = NetTensorTimeSeries(np.zeros((1, 1440)), [ModeNetwork.identity(1)], np.ones((1, 1440), bool))
    assert split_future(ds, 0.1) == 1296
    with pytest.raises(ValueError):
        split_future(ds, 1.0)


def test_synthesize_noise_free_is_low_rank():
    ds = synthesize(SynthConfig(noise=0.0), 3)
    core, factors = hosvd(ds.values, (3, 2, ds.T))
    back = multi_mode_product(core, list(enumerate(factors)))
    np.testing.assert_allclose(back, ds.values, atol=1e-8)


def test_synthesize_deterministic_and_bounded():
    a = synthesize(SynthConfig(T=500), 9)
    b = synthesize(SynthConfig(T=500), 9)
    assert np.array_equal(a.values, b.values)
    assert np.isfinite(a.values).all() and np.abs(a.values).max() < 1e3
    assert [n.size for n in a.networks] == [6, 4]


def test_synthesize_rejects_unstable():
    with pytest.raises(ValueError):
        synthesize(SynthConfig(spectral_radius=1.0), 0)
