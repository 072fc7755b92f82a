"""Complex convolution simulated with real arithmetic on split channels.

A complex feature stack ``h = x + jy`` is stored as two real stacks; as a
single stack the real planes come first and the imaginary planes last. A
complex kernel ``W = A + jB`` acts as::

    Re(W * h) = A * x - B * y
    Im(W * h) = B * x + A * y

which is the block matrix ``[[A, -B], [B, A]]`` applied to ``[x; y]``.
:func:`block_kernels` builds exactly that real kernel stack so a complex
layer can run, and be differentiated, as an ordinary real layer with twice
the planes; :func:`fold_kernel_grad` maps the real gradients back onto
``A`` and ``B``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cxcore import ShapeError, conv_planes, pad_planes
from .layers import ActivationKind, activation


@dataclass(frozen=True)
class SplitTensor:
    real: np.ndarray
    imag: np.ndarray

    def __post_init__(self):
        if self.real.shape != self.imag.shape or self.real.ndim != 3:
            raise ShapeError(f"real {self.real.shape} / imag {self.imag.shape} mismatch")

    @property
    def n_planes(self) -> int:
        return self.real.shape[0]

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.real, self.imag])

    @classmethod
    def from_stacked(cls, planes) -> "SplitTensor":
        planes = np.asarray(planes, dtype=np.float64)
        if planes.shape[0] % 2:
            raise ShapeError(f"odd plane count {planes.shape[0]} cannot split real/imag")
        half = planes.shape[0] // 2
        return cls(planes[:half], planes[half:])


@dataclass(frozen=True)
class SplitKernel:
    """``W = A + jB`` for ``n_in * n_out`` kernel planes (index ``c*n_out + q``)."""

    a: np.ndarray
    b: np.ndarray
    n_out: int = 1

    def __post_init__(self):
        if self.a.shape != self.b.shape or self.a.ndim != 3:
            raise ShapeError(f"A {self.a.shape} / B {self.b.shape} mismatch")
        if self.a.shape[0] % self.n_out:
            raise ShapeError(f"{self.a.shape[0]} planes not divisible by n_out={self.n_out}")

    @property
    def n_in(self) -> int:
        return self.a.shape[0] // self.n_out

    @classmethod
    def from_complex(cls, w, n_out: int = 1) -> "SplitKernel":
        w = np.asarray(w)
        return cls(np.ascontiguousarray(w.real), np.ascontiguousarray(w.imag), n_out)

    def to_complex(self) -> np.ndarray:
        return self.a + 1j * self.b


def split_encode(t) -> SplitTensor:
    t = np.asarray(t)
    if t.ndim == 2:
        t = t[None]
    return SplitTensor(np.ascontiguousarray(t.real, dtype=np.float64),
                       np.ascontiguousarray(t.imag, dtype=np.float64))


def split_decode(s: SplitTensor) -> np.ndarray:
    return s.real + 1j * s.imag


def sim_conv(h: SplitTensor, w: SplitKernel) -> SplitTensor:
    """Complex valid convolution from four real ones."""
    if h.n_planes != w.n_in:
        raise ShapeError(f"{h.n_planes} input planes for a kernel expecting {w.n_in}")
    ax = conv_planes(h.real, w.a, w.n_out)
    by = conv_planes(h.imag, w.b, w.n_out)
    bx = conv_planes(h.real, w.b, w.n_out)
    ay = conv_planes(h.imag, w.a, w.n_out)
    return SplitTensor(ax - by, bx + ay)


def block_kernels(w: SplitKernel) -> np.ndarray:
    """Real kernel stack of the doubled-channel layer equivalent to ``w``.

    Input planes are ``[x_0..x_{n-1}, y_0..y_{n-1}]`` and output planes
    ``[re_0..re_{m-1}, im_0..im_{m-1}]``.
    """
    n_in, n_out = w.n_in, w.n_out
    d, e = w.a.shape[1:]
    a = w.a.reshape(n_in, n_out, d, e)
    b = w.b.reshape(n_in, n_out, d, e)
    blocks = np.empty((2, n_in, 2, n_out, d, e))
    blocks[0, :, 0] = a   # x -> re
    blocks[0, :, 1] = b   # x -> im
    blocks[1, :, 0] = -b  # y -> re
    blocks[1, :, 1] = a   # y -> im
    return blocks.reshape(4 * n_in * n_out, d, e)


def fold_kernel_grad(g_real, n_in: int, n_out: int) -> np.ndarray:
    """Collapse the doubled layer's kernel gradient onto ``gA + j gB``."""
    g_real = np.asarray(g_real)
    d, e = g_real.shape[1:]
    gb = g_real.reshape(2, n_in, 2, n_out, d, e)
    g_a = gb[0, :, 0] + gb[1, :, 1]
    g_b = gb[0, :, 1] - gb[1, :, 0]
    return (g_a + 1j * g_b).reshape(n_in * n_out, d, e)


def block_dense(w3) -> np.ndarray:
    """``(n_out, K)`` complex weights -> ``(2 n_out, 2K)`` real block matrix."""
    w3 = np.asarray(w3)
    return np.block([[w3.real, -w3.imag], [w3.imag, w3.real]])


def fold_dense_grad(g_real) -> np.ndarray:
    n2, k2 = g_real.shape
    n, k = n2 // 2, k2 // 2
    g_a = g_real[:n, :k] + g_real[n:, k:]
    g_b = g_real[n:, :k] - g_real[:n, k:]
    return g_a + 1j * g_b


def split_vector(v) -> np.ndarray:
    v = np.asarray(v)
    return np.concatenate([v.real, v.imag]).astype(np.float64)


def fold_vector(v) -> np.ndarray:
    v = np.asarray(v)
    half = v.shape[0] // 2
    return v[:half] + 1j * v[half:]


# --- residual block ---------------------------------------------------------

@dataclass
class ResidualCache:
    s: np.ndarray
    a: np.ndarray
    p: np.ndarray
    q: np.ndarray
    r1: np.ndarray
    r2: np.ndarray
    pad: int


def conv_same(x, kernels, n_out: int) -> np.ndarray:
    """Shape-preserving convolution (zero padding ``(d-1)/2``, odd ``d`` only)."""
    d = kernels.shape[1]
    if d % 2 == 0 or kernels.shape[2] != d:
        raise ShapeError(f"same padding needs square odd kernels, got {kernels.shape[1:]}")
    pad = (d - 1) // 2
    return conv_planes(pad_planes(x, pad, pad), kernels, n_out)


def residual_forward_planes(s, r1, r2, kind: ActivationKind):
    """``s + conv_same(act(conv_same(act(s), r1)), r2)`` on plain plane stacks.

    Returns the output and the cache needed by the backward pass.
    """
    n = s.shape[0]
    if r1.shape[0] != n * n or r2.shape[0] != n * n:
        raise ShapeError(f"residual kernels must hold {n}x{n} planes")
    a = activation(kind, s)
    p = conv_same(a, r1, n)
    q = activation(kind, p)
    out_q = conv_same(q, r2, n)
    if out_q.shape != s.shape:
        raise ShapeError(f"skip add of {s.shape} and {out_q.shape}")
    cache = ResidualCache(s=s, a=a, p=p, q=q, r1=r1, r2=r2, pad=(r1.shape[1] - 1) // 2)
    return s + out_q, cache


def residual_block_forward(s: SplitTensor, k1: SplitKernel, k2: SplitKernel,
                           kind: ActivationKind) -> SplitTensor:
    """Act -> Conv -> Act -> Conv with an identity skip, in split representation.

    Normalization layers are identity here. A complex ``kind`` is applied as
    its per-channel real counterpart (CReLU acts as ReLU on every plane).
    """
    real_kind = kind.real_counterpart()
    out, _ = residual_forward_planes(
        s.stacked(), block_kernels(k1), block_kernels(k2), real_kind
    )
    return SplitTensor.from_stacked(out)
