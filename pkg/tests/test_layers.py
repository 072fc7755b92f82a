import numpy as np
import pytest

from cvnet import layers
from cvnet.cxcore import ShapeError
from cvnet.layers import ActivationKind, LayerShapes, parse_activation
from conftest import crandn
from oracles import flatten_loops, pool_loops


def test_crelu_values():
    v = np.array([1 - 2j, -1 + 3j, -1 - 1j, 2 + 2j])
    out = layers.activation(layers.CRELU, v)
    np.testing.assert_array_equal(out, [1, 3j, 0, 2 + 2j])


def test_crelu_default_derivative_same_sign():
    v = np.array([1 + 1j, -1 - 1j, 1 - 1j, -1 + 1j])
    np.testing.assert_array_equal(layers.activation_deriv(layers.CRELU, v), [1, 1, 0, 0])


def test_crelu_split_derivative():
    kind = parse_activation("crelu-split")
    v = np.array([1 + 1j, -1 - 1j, 1 - 1j, -1 + 1j])
    np.testing.assert_array_equal(layers.activation_deriv(kind, v), [1 + 1j, 0, 1, 1j])
    assert str(kind) == "crelu-split"


def test_zrelu_first_quadrant_only():
    kind = ActivationKind("zrelu")
    v = np.array([1 + 1j, -1 + 1j, 2j, 3.0 + 0j])
    np.testing.assert_array_equal(layers.activation(kind, v), [1 + 1j, 0, 2j, 3])


@pytest.mark.parametrize("text", ["relu", "lrelu:0.1", "elu", "sigmoid", "tanh", "identity",
                                  "split-sigmoid", "split-tanh"])
def test_derivatives_match_finite_differences(text, rng):
    kind = parse_activation(text)
    x = rng.uniform(-3, 3, 50)
    x = x[np.abs(x) > 1e-3]
    if kind.is_real:
        h = 1e-6
        num = (layers.activation(kind, x + h) - layers.activation(kind, x - h)) / (2 * h)
        np.testing.assert_allclose(layers.activation_deriv(kind, x), num, atol=1e-6)
    else:
        z = x + 1j * rng.uniform(-3, 3, len(x))
        h = 1e-6
        d_re = (layers.activation(kind, z + h) - layers.activation(kind, z - h)).real / (2 * h)
        d_im = (layers.activation(kind, z + 1j * h) - layers.activation(kind, z - 1j * h)).imag / (2 * h)
        d = layers.activation_deriv(kind, z)
        np.testing.assert_allclose(d.real, d_re, atol=1e-6)
        np.testing.assert_allclose(d.imag, d_im, atol=1e-6)


def test_elu_uses_scaled_expm1():
    kind = parse_activation("elu:2")
    np.testing.assert_allclose(layers.activation(kind, np.array([-1.0])), [2 * (np.exp(-1) - 1)])


def test_sigmoid_is_overflow_safe():
    with np.errstate(over="raise"):
        out = layers.activation(ActivationKind("sigmoid"), np.array([-1000.0, 1000.0]))
    np.testing.assert_array_equal(out, [0.0, 1.0])


def test_real_activation_rejects_complex():
    with pytest.raises(ValueError):
        layers.activation(ActivationKind("relu"), np.array([1 + 1j]))
    with pytest.raises(ValueError):
        parse_activation("swish")
    with pytest.raises(ValueError):
        ActivationKind("zrelu").real_counterpart()


def test_layer_shapes_default_sizes():
    s = LayerShapes(32, 24)
    assert (s.alpha_v1, s.beta_v1, s.alpha_s1, s.beta_s1) == (30, 22, 15, 11)
    assert (s.alpha_v2, s.beta_v2, s.alpha_s2, s.beta_s2) == (13, 9, 6, 4)
    assert s.k_fc == 96


def test_toy_input_8x6_collapses():
    with pytest.raises(ShapeError):
        LayerShapes(8, 6, d1=2, d2=2, k1=2, k2=2, g=2)
    assert LayerShapes(8, 7, d1=2, d2=2, k1=2, k2=2, g=2).k_fc == 2


def test_pool_and_flatten_match_loops(rng):
    o = crandn(rng, 7, 9)
    np.testing.assert_allclose(layers.avgpool_forward(o, 2), pool_loops(o, 2), atol=1e-15)
    np.testing.assert_allclose(layers.avgpool_forward(o, 3), pool_loops(o, 3), atol=1e-15)
    planes = crandn(rng, 3, 4, 5)
    v = layers.flatten(planes)
    np.testing.assert_array_equal(v, flatten_loops(planes))
    np.testing.assert_array_equal(layers.unflatten(v, 3, 4, 5), planes)


def test_pool_example():
    o = np.array([[1, 2], [3, 4]], dtype=complex)
    assert layers.avgpool_forward(o, 2)[0, 0] == 2.5


def test_conv_layer_bias_broadcast(rng):
    x = crandn(rng, 1, 5, 5)
    w = np.zeros((2, 3, 3), complex)
    v, o = layers.conv_layer_forward(x, w, np.array([1 - 1j, -2 + 0.5j]),
                                     ActivationKind("identity"))
    np.testing.assert_array_equal(v[0], np.full((3, 3), 1 - 1j))
    np.testing.assert_array_equal(o[1], np.full((3, 3), -2 + 0.5j))
    with pytest.raises(ShapeError):
        layers.conv_layer_forward(x, w, np.zeros(3), layers.CRELU)


def test_dense_forward_shapes(rng):
    w, f = crandn(rng, 1, 6), crandn(rng, 6)
    v3, y = layers.dense_forward(w, f, np.zeros(1), layers.SPLIT_SIGMOID)
    assert v3.shape == (1,)
    assert 0 < y[0].real < 1 and 0 < y[0].imag < 1
    with pytest.raises(ShapeError):
        layers.dense_forward(w, f[:5], np.zeros(1), layers.SPLIT_SIGMOID)


def test_init_params_uniform_and_seeded():
    s = LayerShapes(16, 16)
    a = layers.init_params(s, 3)
    b = layers.init_params(s, 3)
    for (_, x), (_, y) in zip(a.items(), b.items()):
        np.testing.assert_array_equal(x, y)
    assert np.all((a.w1.real >= 0) & (a.w1.real < 1) & (a.w1.imag >= 0) & (a.w1.imag < 1))
    assert not np.any(a.b1) and not np.any(a.b3)
    r = layers.init_params(s, 3, real=True, in_planes=2)
    assert r.w1.dtype == np.float64 and r.w1.shape == (4, 3, 3)
