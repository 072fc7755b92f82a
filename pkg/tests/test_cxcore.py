import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cvnet import cxcore
from cvnet.cxcore import ShapeError
from cvnet.verify import conv_oracle
from conftest import crandn
from oracles import conv_loops, correlate_loops


def test_conv_valid_worked_example():
    x = np.array([[1 + 1j, 2], [0, 1 - 1j]])
    k = np.array([[1, 0], [0, -1j]])
    out = cxcore.conv_valid(x, k)
    assert out.shape == (1, 1)
    assert out[0, 0] == pytest.approx(2 - 2j)


def test_conv_valid_identity_kernel():
    x = np.arange(12).reshape(3, 4) + 0.5j
    out = cxcore.conv_valid(x, np.array([[1.0]]))
    np.testing.assert_array_equal(out, x)


def test_conv_matches_loop_oracle(rng):
    for _ in range(20):
        a, b = rng.integers(2, 9, size=2)
        d, e = rng.integers(1, a + 1), rng.integers(1, b + 1)
        x, k = crandn(rng, a, b), crandn(rng, d, e)
        np.testing.assert_allclose(cxcore.conv_valid(x, k), conv_loops(x, k), atol=1e-12)
        np.testing.assert_allclose(cxcore.correlate_valid(x, k), correlate_loops(x, k), atol=1e-12)


def test_kernel_larger_than_input_raises():
    with pytest.raises(ShapeError):
        cxcore.conv_valid(np.ones((2, 2)), np.ones((3, 1)))
    with pytest.raises(ShapeError):
        conv_oracle(np.ones((2, 2)), np.ones((1, 3)))


def test_bad_ranks_raise():
    with pytest.raises(ShapeError):
        cxcore.conv_valid(np.ones(3), np.ones((1, 1)))
    with pytest.raises(ShapeError):
        cxcore.conv_planes(np.ones((2, 3, 3)), np.ones((3, 2, 2)), 2)


def test_rot180_and_entry():
    m = np.arange(6).reshape(2, 3)
    r = cxcore.rot180(m)
    for i in range(1, 3):
        for j in range(1, 4):
            assert cxcore.entry(r, i, j) == cxcore.entry(m, 3 - i, 4 - j)
    np.testing.assert_array_equal(cxcore.rot180(r), m)
    with pytest.raises(IndexError):
        cxcore.entry(m, 0, 1)


def test_conv_planes_index_layout(rng):
    n_in, n_out = 3, 2
    x = crandn(rng, n_in, 6, 5)
    k = crandn(rng, n_in * n_out, 2, 3)
    out = cxcore.conv_planes(x, k, n_out)
    for q in range(n_out):
        ref = sum(conv_loops(x[c], k[c * n_out + q]) for c in range(n_in))
        np.testing.assert_allclose(out[q], ref, atol=1e-12)


def test_check_finite():
    with pytest.raises(cxcore.NonFiniteError):
        cxcore.check_finite(np.array([1.0, np.nan]))
    with pytest.raises(ShapeError):
        cxcore.hadamard(np.ones(2), np.ones(3))
    np.testing.assert_array_equal(cxcore.axpy(2, np.ones(2), np.ones(2)), [3, 3])


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(1, 3), st.integers(1, 3),
       st.integers(0, 2**31))
def test_conv_is_linear_in_input(a, b, d, e, seed):
    rng = np.random.default_rng(seed)
    a, b = max(a, d), max(b, e)
    x1, x2, k = crandn(rng, a, b), crandn(rng, a, b), crandn(rng, d, e)
    c = complex(rng.standard_normal(), rng.standard_normal())
    lhs = cxcore.conv_valid(c * x1 + x2, k)
    rhs = c * cxcore.conv_valid(x1, k) + cxcore.conv_valid(x2, k)
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)
