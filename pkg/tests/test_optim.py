import numpy as np
import pytest

from cvnet import optim
from cvnet.cxcore import NonFiniteError, ShapeError
from cvnet.layers import LayerShapes, init_params
from cvnet.optim import Optimizer


def _pair(seed=0):
    p = init_params(LayerShapes(12, 12), seed)
    rng = np.random.default_rng(seed + 1)
    g = p.map(lambda _, a: rng.standard_normal(a.shape) + 1j * rng.standard_normal(a.shape))
    return p, g


def test_sgd_step():
    p, g = _pair()
    q = optim.sgd_step(p, g, 0.1)
    np.testing.assert_array_equal(q.w1, p.w1 + (-0.1 * g.w1))
    assert q.w1 is not p.w1


def test_momentum_zero_equals_sgd_bitwise():
    p, g = _pair()
    a = Optimizer(0.05, momentum=0.0)
    b = Optimizer(0.05, momentum=0.0)
    b.velocity = optim.GradientSet(**{n: np.zeros_like(x) for n, x in g.items()})
    pa, pb = p, p
    for _ in range(3):
        pa, pb = a.step(pa, g), b.step(pb, g)
    for (_, x), (_, y) in zip(pa.items(), pb.items()):
        assert x.tobytes() == y.tobytes()


def test_momentum_accumulates():
    p, g = _pair()
    opt = Optimizer(0.1, momentum=0.5)
    p1 = opt.step(p, g)
    p2 = opt.step(p1, g)
    np.testing.assert_allclose(p2.w3 - p1.w3, -0.1 * g.w3 * 1.5)


def test_l2_decay_exact_factor_biases_exempt():
    p, g = _pair()
    p = p.replace(b1=np.array([1 + 1j, 2.0]))
    zero = g.map(lambda _, a: np.zeros_like(a))
    opt = Optimizer(0.1, weight_decay=2.0, reg="l2")
    q = opt.step(p, zero, n_train=40)
    factor = 1 - 0.1 * 2.0 / 40
    assert np.array_equal(q.w1, factor * p.w1)
    assert np.array_equal(q.b1, p.b1)


def test_l1_decay_sign():
    p, g = _pair()
    zero = g.map(lambda _, a: np.zeros_like(a))
    q = Optimizer(0.1, weight_decay=1.0, reg="l1").step(p, zero, n_train=10)
    np.testing.assert_allclose(q.w2, p.w2 - 0.01 * (np.sign(p.w2.real) + 1j * np.sign(p.w2.imag)))


def test_validation():
    with pytest.raises(ValueError):
        Optimizer(-1.0)
    with pytest.raises(ValueError):
        Optimizer(0.1, momentum=1.0)
    with pytest.raises(ValueError):
        optim.apply_weight_decay(_pair()[0], 1.0, 10.0, 1, "l2")
    p, g = _pair()
    with pytest.raises(NonFiniteError):
        optim.sgd_step(p, g.replace(w1=g.w1 * np.nan), 0.1)
    with pytest.raises(ShapeError):
        optim.sgd_step(p, g.replace(w1=g.w1[:1]), 0.1)


def test_zero_lr_is_identity():
    p, g = _pair()
    q = Optimizer(0.0).step(p, g)
    np.testing.assert_array_equal(q.w1, p.w1)
