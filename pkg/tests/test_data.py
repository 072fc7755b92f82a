import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cvnet import data
from cvnet.data import CVDSFormatError, Dataset
from conftest import crandn
from oracles import knn_accuracy


def _ds(rng, n=5, h=3, w=4):
    return Dataset(crandn(rng, n, h, w), rng.integers(0, 2, n), "t")


def test_cvds_roundtrip(tmp_path, rng):
    ds = _ds(rng)
    path = tmp_path / "a.cvds"
    data.cvds_write(ds, path)
    back = data.cvds_read(path)
    np.testing.assert_array_equal(back.x, ds.x.astype(np.complex64))
    np.testing.assert_array_equal(back.y, ds.y)
    assert path.stat().st_size == 20 + 5 * (1 + 8 * 12)


def test_cvds_header_layout(tmp_path, rng):
    path = tmp_path / "a.cvds"
    data.cvds_write(_ds(rng, 2, 3, 4), path)
    assert struct.unpack_from("<4sHHIII", path.read_bytes()) == (b"CVDS", 1, 0, 2, 3, 4)


@pytest.mark.parametrize("mutate,msg", [
    (lambda b: b"XXXX" + b[4:], "magic"),
    (lambda b: b[:4] + struct.pack("<H", 2) + b[6:], "version"),
    (lambda b: b[:-1], "truncated"),
    (lambda b: b + b"\0", "trailing"),
    (lambda b: b[:20] + b"\x05" + b[21:], "label"),
    (lambda b: b[:8] + struct.pack("<I", 0) + b[12:], "empty"),
])
def test_cvds_rejects_malformed(tmp_path, rng, mutate, msg):
    path = tmp_path / "a.cvds"
    data.cvds_write(_ds(rng), path)
    path.write_bytes(mutate(path.read_bytes()))
    with pytest.raises(CVDSFormatError, match=msg):
        data.cvds_read(path)


def test_cvds_rejects_overflow(tmp_path):
    ds = Dataset(np.full((1, 2, 2), 1e300 + 0j), [0])
    with pytest.raises(CVDSFormatError):
        data.cvds_write(ds, tmp_path / "x.cvds")


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(np.zeros((2, 2, 2)), [0, 2])
    with pytest.raises(ValueError):
        Dataset(np.full((1, 2, 2), np.nan), [0])
    with pytest.raises(ValueError):
        Dataset(np.zeros((2, 2)), [0, 1])


def test_pad_uniform():
    ds = data.pad_uniform([np.ones((2, 3)), np.ones((2, 5))], [0, 1], 6)
    assert ds.x.shape == (2, 2, 6)
    assert ds.x[0, :, 3:].sum() == 0 and ds.x[1, :, :5].sum() == 10
    with pytest.raises(ValueError):
        data.pad_uniform([np.ones((2, 7))], [0], 6)


def test_holdout_sizes_and_determinism():
    s = data.split_holdout(100, 0.8, seed=3)
    assert (len(s.train), len(s.val), len(s.test)) == (80, 0, 20)
    s2 = data.split_holdout(100, 0.8, seed=3)
    np.testing.assert_array_equal(s.train, s2.train)
    s3 = data.split_holdout(100, 0.7, seed=3, val_frac=0.1)
    assert (len(s3.train), len(s3.val), len(s3.test)) == (70, 10, 20)
    with pytest.raises(ValueError):
        data.split_holdout(3, 0.1)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 60), st.data())
def test_kfold_partition_laws(n, draw):
    k = draw.draw(st.integers(2, n))
    folds = data.kfold(n, k, seed=draw.draw(st.integers(0, 100)))
    tests = [set(f.test.tolist()) for f in folds]
    assert set().union(*tests) == set(range(n))
    assert sum(len(t) for t in tests) == n
    sizes = [len(t) for t in tests]
    assert max(sizes) - min(sizes) <= 1
    for f in folds:
        assert set(f.train.tolist()) | set(f.test.tolist()) == set(range(n))


def test_kfold_n_equals_loocv_pattern():
    folds = data.kfold(7, 7, seed=0)
    loo = data.loocv(7)
    assert sorted(f.test.tolist() for f in folds) == [f.test.tolist() for f in loo]


def test_synth_shape_balance_and_seed():
    a = data.synth_gestures(10, 16, 12, seed=4)
    b = data.synth_gestures(10, 16, 12, seed=4)
    assert a.x.shape == (20, 16, 12) and a.y.sum() == 10
    np.testing.assert_array_equal(a.x, b.x)
    assert not np.array_equal(a.x, data.synth_gestures(10, 16, 12, seed=5).x)
    with pytest.raises(ValueError):
        data.synth_gestures(10, 4, 12)


@pytest.mark.parametrize("noise", [0.0, 0.05])
def test_synth_classes_separable_by_knn(noise):
    ds = data.synth_gestures(50, 32, 24, noise_sigma=noise, seed=0)
    assert knn_accuracy(ds.x, ds.y) == 1.0


def test_fingerprint_sensitive_to_labels(rng):
    ds = _ds(rng)
    fp = data.fingerprint(ds)
    flipped = Dataset(ds.x, 1 - ds.y)
    assert fp["sha256"] != data.fingerprint(flipped)["sha256"]
    assert (fp["count"], fp["height"], fp["width"]) == (5, 3, 4)
