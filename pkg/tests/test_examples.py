"""Worked numerical examples for individual operations."""
import numpy as np
import pytest

from cvnet import backprop, data, train
from cvnet.data import SplitIndices
from cvnet.optim import Optimizer
from cvnet.train import Network, TrainConfig


def test_loss_examples():
    assert backprop.loss(1, 0) == 0.5
    assert backprop.loss(1 + 1j, 0) == pytest.approx(1.0)
    assert backprop.loss(0.3 - 2j, 0.3 - 2j) == 0


def test_loss_grad_examples():
    assert backprop.loss_grad(1, 0.3 + 0.2j, "abs") == pytest.approx(0.7 + 0.2j)
    assert backprop.loss_grad(0.4 + 1j, 0.4 + 1j, "signed") == 0


def test_signed_grad_matches_finite_differences():
    rng = np.random.default_rng(0)
    h = 1e-6
    for _ in range(10):
        y = complex(*rng.standard_normal(2))
        yh = complex(*rng.standard_normal(2))
        d_re = (backprop.loss(y, yh + h) - backprop.loss(y, yh - h)) / (2 * h)
        d_im = (backprop.loss(y, yh + 1j * h) - backprop.loss(y, yh - 1j * h)) / (2 * h)
        g = backprop.loss_grad(y, yh, "signed")
        assert abs(g - complex(d_re, d_im)) / abs(g) < 1e-6


@pytest.mark.parametrize("n,train_n,test_n", [(945, 756, 189), (1488, 1190, 298)])
def test_holdout_counts(n, train_n, test_n):
    s = data.split_holdout(n, 0.8, seed=0)
    assert (len(s.train), len(s.test)) == (train_n, test_n)


def test_early_stop_examples():
    assert not train.early_stop([5, 4, 3, 2, 1], 1)
    flat = [1.0] * 6
    first = next(e for e in range(1, 7) if train.early_stop(flat[:e], 3))
    assert first == 4
    assert not train.early_stop([1.0, 1.0, 1.0, 0.5, 0.5], 3)


def test_tie_rule_and_perfect_predictor():
    assert train.predict_class(0.5 + 0.5j) == 1
    assert train.predict_class(0.49999) == 0
    ds = data.synth_gestures(3, 8, 8, seed=0)
    cfg = TrainConfig(d1=2, d2=2, k1=1, k2=1)
    p = train.new_params(cfg, 8, 8)
    # zero weights and a bias that saturates the output to the label
    for label in (0, 1):
        q = p.map(lambda _, a: np.zeros_like(a))
        q.b3[:] = 1e3 if label else -1e3
        q.b3[:] = q.b3 - 1e3j
        idx = np.flatnonzero(ds.y == label)
        r = train.evaluate(q, ds, idx, cfg)
        assert (r.loss, r.acc, r.mae, r.mbe) == (0.0, 1.0, 0.0, 0j)


def test_mbe_cancels_symmetric_errors():
    ds = data.Dataset(np.zeros((2, 8, 8)), [0, 1])
    cfg = TrainConfig(d1=2, d2=2, k1=1, k2=1)
    # all-zero weights give 0.5 + 0.5j for both samples: real errors are -0.5 and +0.5
    p = train.new_params(cfg, 8, 8).map(lambda _, a: np.zeros_like(a))
    r = train.evaluate(p, ds, [0, 1], cfg)
    assert r.mbe == pytest.approx(-0.5j)
    assert r.mae == pytest.approx(np.sqrt(0.5))


def test_zero_lr_epoch_keeps_params_and_computes_metrics():
    ds = data.synth_gestures(5, 16, 16, seed=1)
    cfg = TrainConfig(lr=0.0, batch=3, k2=2)
    splits = data.split_holdout(len(ds), 0.8, 0)
    p0 = train.new_params(cfg, 16, 16)
    p1, m = train.train_epoch(p0, Optimizer(0.0), ds, splits, cfg)
    for (_, a), (_, b) in zip(p0.items(), p1.items()):
        np.testing.assert_array_equal(a, b)
    assert 0 <= m.train_acc <= 1 and m.train_loss >= 0


def test_batch_one_is_per_sample_sgd():
    ds = data.synth_gestures(4, 16, 16, seed=3)
    cfg = TrainConfig(activation="split-tanh", lr=0.05, batch=1, k2=2, epochs=1)
    splits = SplitIndices(train=np.arange(6), test=np.arange(6, 8))
    res = train.fit(ds, cfg, splits)
    net = Network(cfg)
    p = train.new_params(cfg, 16, 16)
    for i in train.epoch_order(splits.train, cfg.seed, 1):
        g, _ = net.gradients(p, ds.x[i], int(ds.y[i]))
        p = p.map(lambda n, a: a - 0.05 * getattr(g, n))
    for (_, a), (_, b) in zip(res.params.items(), p.items()):
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-14)


def test_train_loss_decreases_over_first_five_epochs():
    ds = data.synth_gestures(100, 32, 24, noise_sigma=0.05, seed=0)
    cfg = TrainConfig(variant="full-cv", activation="crelu", loss_grad="signed", lr=1e-3,
                      batch=10, epochs=5, seed=0)
    losses = [m.train_loss for m in train.fit(ds, cfg).history]
    assert all(b < a for a, b in zip(losses, losses[1:])), losses
