import numpy as np
import pytest

from cvnet import simcv
from cvnet.cxcore import ShapeError, conv_planes
from cvnet.layers import ActivationKind
from cvnet.simcv import SplitKernel, SplitTensor
from conftest import crandn


def test_encode_decode_roundtrip(rng):
    t = crandn(rng, 3, 4, 5)
    s = simcv.split_encode(t)
    np.testing.assert_array_equal(simcv.split_decode(s), t)
    np.testing.assert_array_equal(SplitTensor.from_stacked(s.stacked()).imag, t.imag)
    with pytest.raises(ShapeError):
        SplitTensor.from_stacked(np.zeros((3, 2, 2)))


def test_sim_conv_matches_direct(rng):
    h = crandn(rng, 2, 7, 6)
    w = crandn(rng, 6, 3, 3)
    sim = simcv.sim_conv(simcv.split_encode(h), SplitKernel.from_complex(w, 3))
    np.testing.assert_allclose(simcv.split_decode(sim), conv_planes(h, w, 3), atol=1e-12)


def test_sim_conv_plane_mismatch(rng):
    with pytest.raises(ShapeError):
        simcv.sim_conv(simcv.split_encode(crandn(rng, 2, 5, 5)),
                       SplitKernel.from_complex(crandn(rng, 3, 2, 2), 1))


def test_block_kernels_reproduce_complex_conv(rng):
    n_in, n_out = 2, 3
    h = crandn(rng, n_in, 6, 6)
    w = crandn(rng, n_in * n_out, 2, 2)
    real = conv_planes(simcv.split_encode(h).stacked(),
                       simcv.block_kernels(SplitKernel.from_complex(w, n_out)), 2 * n_out)
    out = SplitTensor.from_stacked(real)
    np.testing.assert_allclose(simcv.split_decode(out), conv_planes(h, w, n_out), atol=1e-12)


def test_block_dense_and_folds(rng):
    w3, f = crandn(rng, 1, 5), crandn(rng, 5)
    out = simcv.block_dense(w3) @ simcv.split_vector(f)
    np.testing.assert_allclose(simcv.fold_vector(out), w3 @ f, atol=1e-12)
    g = rng.standard_normal((2, 10))
    # fold is the adjoint of block expansion: <G, block(W)> = Re<fold(G), W>
    lhs = np.sum(g * simcv.block_dense(w3))
    rhs = np.sum((simcv.fold_dense_grad(g).conj() * w3).real)
    assert lhs == pytest.approx(rhs)


def test_residual_zero_kernels_is_identity(rng):
    s = simcv.split_encode(rng.standard_normal((2, 5, 5)) + 0j)
    z = SplitKernel(np.zeros((4, 3, 3)), np.zeros((4, 3, 3)), 2)
    out = simcv.residual_block_forward(s, z, z, ActivationKind("crelu"))
    np.testing.assert_array_equal(out.stacked(), s.stacked())


def test_residual_identity_kernels_double_positive_input():
    s = simcv.split_encode(np.ones((1, 4, 4)) + 0j)
    one = SplitKernel(np.ones((1, 1, 1)), np.zeros((1, 1, 1)), 1)
    out = simcv.residual_block_forward(s, one, one, ActivationKind("crelu"))
    np.testing.assert_array_equal(out.real, 2 * np.ones((1, 4, 4)))


def test_conv_same_needs_odd():
    with pytest.raises(ShapeError):
        simcv.conv_same(np.zeros((1, 4, 4)), np.zeros((1, 2, 2)), 1)
