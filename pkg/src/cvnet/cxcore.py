"""Complex matrix primitives shared by every layer.

A *matrix* here is a 2-D numpy array and a *tensor* a 3-D array of planes
``(planes, rows, cols)``. Arrays are complex128 in complex mode; in real mode
the same functions accept float64 arrays and stay real.

Public element access (:func:`entry`) is 1-based to match the index
conventions used in the layer equations; everything else is ordinary numpy
indexing. Shape mismatches are always errors, nothing is broadcast.
"""
from __future__ import annotations

import numpy as np

from . import _backend


class ShapeError(ValueError):
    """Operand dimensions are incompatible."""


class NonFiniteError(FloatingPointError):
    """A NaN or Inf showed up where only finite values are admitted."""


def _as_array(a, ndim: int) -> np.ndarray:
    arr = np.asarray(a)
    if arr.ndim != ndim:
        raise ShapeError(f"expected a {ndim}-D array, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.complexfloating):
        arr = arr.astype(np.float64, copy=False)
    else:
        arr = arr.astype(np.complex128, copy=False)
    return arr


def as_matrix(a) -> np.ndarray:
    m = _as_array(a, 2)
    if m.size == 0:
        raise ShapeError("matrix dimensions must be positive")
    check_finite(m)
    return m


def as_tensor(a) -> np.ndarray:
    t = _as_array(a, 3)
    if t.size == 0:
        raise ShapeError("tensor dimensions must be positive")
    check_finite(t)
    return t


def check_finite(a: np.ndarray, what: str = "array") -> np.ndarray:
    if not np.all(np.isfinite(a)):
        raise NonFiniteError(f"{what} contains NaN or Inf")
    return a


def entry(m: np.ndarray, i: int, j: int):
    """Element ``(i, j)`` of ``m`` using 1-based indices."""
    rows, cols = m.shape
    if not (1 <= i <= rows and 1 <= j <= cols):
        raise IndexError(f"({i}, {j}) outside 1..{rows} x 1..{cols}")
    return m[i - 1, j - 1]


def rot180(m: np.ndarray) -> np.ndarray:
    """Rotate the last two axes by 180 degrees: ``out(i, j) = m(r+1-i, c+1-j)``."""
    return np.ascontiguousarray(np.asarray(m)[..., ::-1, ::-1])


def _check_fits(in_shape, k_shape):
    if k_shape[0] > in_shape[0] or k_shape[1] > in_shape[1]:
        raise ShapeError(f"kernel {k_shape} larger than input {in_shape}")


def correlate_valid(x: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Sliding dot product without kernel flip, valid positions only."""
    x, k = as_matrix(x), as_matrix(k)
    _check_fits(x.shape, k.shape)
    return _backend.correlate_multi(x[None], k[None], 1)[0]


def conv_valid(x: np.ndarray, k: np.ndarray) -> np.ndarray:
    """True 2-D convolution (flip then correlate), stride 1, no padding.

    Output is ``(rows - kr + 1, cols - kc + 1)``.
    """
    x, k = as_matrix(x), as_matrix(k)
    _check_fits(x.shape, k.shape)
    return _backend.correlate_multi(x[None], rot180(k)[None], 1)[0]


def conv_planes(x: np.ndarray, kernels: np.ndarray, n_out: int) -> np.ndarray:
    """Multi-plane convolution summed over input planes.

    ``out[q] = sum_c conv_valid(x[c], kernels[c * n_out + q])``, i.e. kernel
    plane for (input c, output q) sits at index ``c * n_out + q``.
    """
    x, kernels = as_tensor(x), as_tensor(kernels)
    if kernels.shape[0] != x.shape[0] * n_out:
        raise ShapeError(
            f"{kernels.shape[0]} kernel planes for {x.shape[0]} inputs x {n_out} outputs"
        )
    _check_fits(x.shape[1:], kernels.shape[1:])
    return _backend.correlate_multi(x, rot180(kernels), n_out)


def pad_planes(t: np.ndarray, pr: int, pc: int) -> np.ndarray:
    """Zero-pad the last two axes by ``pr`` rows and ``pc`` cols on every side."""
    widths = [(0, 0)] * (t.ndim - 2) + [(pr, pr), (pc, pc)]
    return np.pad(t, widths)


def hadamard(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Elementwise complex product."""
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ShapeError(f"hadamard of {a.shape} and {b.shape}")
    return a * b


def axpy(alpha, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """``alpha * x + y`` with strict shape agreement."""
    x, y = np.asarray(x), np.asarray(y)
    if x.shape != y.shape:
        raise ShapeError(f"axpy of {x.shape} and {y.shape}")
    return alpha * x + y
