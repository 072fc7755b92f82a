"""Loss, loss derivative and every parameter gradient of the two-layer network.

Gradient convention: for a parameter ``p = a + jb`` the stored gradient is
``dL/da + j dL/db``. Under this convention the chain rule through a complex
product ``z = w * x`` reads ``grad_x = conj(w) * grad_z``, which is why the
conv and dense gradients below correlate against conjugated operands. In real
mode ``conj`` is a no-op and the formulas reduce to the usual real ones.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import _backend
from .cxcore import ShapeError, pad_planes, rot180
from .layers import ActivationKind, ForwardCache, TensorBundle, activation_deriv, unflatten


class LossGradMode(str, enum.Enum):
    """``ABS``: ``|Re y - Re yhat| + j|Im y - Im yhat|``. ``SIGNED``: ``yhat - y``."""

    ABS = "abs"
    SIGNED = "signed"


@dataclass
class GradientSet(TensorBundle):
    pass


def loss(y, yhat) -> float:
    """``1/2 |y - yhat|^2`` summed over output components."""
    diff = np.asarray(y) - np.asarray(yhat)
    return 0.5 * float(np.sum(diff.real**2 + diff.imag**2))


def loss_grad(y, yhat, mode: LossGradMode = LossGradMode.SIGNED):
    y, yhat = np.asarray(y), np.asarray(yhat)
    mode = LossGradMode(mode)
    if mode is LossGradMode.SIGNED:
        return yhat - y
    re = np.abs(y.real - yhat.real)
    if not (np.iscomplexobj(y) or np.iscomplexobj(yhat)):
        return re
    return re + 1j * np.abs(y.imag - yhat.imag)


def upsample(gs, g: int, target_shape) -> np.ndarray:
    """Spread each pooled gradient over its ``g x g`` window at weight ``1/g^2``.

    Works on the last two axes. Cells beyond ``g * gs.shape`` (dropped by the
    forward pooling) receive exactly zero.
    """
    gs = np.asarray(gs)
    rows, cols = target_shape[-2], target_shape[-1]
    pr, pc = gs.shape[-2] * g, gs.shape[-1] * g
    if pr > rows or pc > cols or rows - pr >= g or cols - pc >= g:
        raise ShapeError(f"cannot upsample {gs.shape[-2:]} by {g} onto {rows}x{cols}")
    out = np.zeros(gs.shape[:-2] + (rows, cols), dtype=gs.dtype)
    spread = np.repeat(np.repeat(gs, g, axis=-2), g, axis=-1) / (g * g)
    out[..., :pr, :pc] = spread
    return out


def activation_backward(kind: ActivationKind, g_out, v) -> np.ndarray:
    """Carry an upstream gradient through ``act`` evaluated at ``v``.

    Split derivatives scale the real and imaginary gradient parts by their
    own factor; the others are scalar fields and multiply the whole value.
    """
    d = activation_deriv(kind, v)
    g_out = np.asarray(g_out)
    if g_out.shape != d.shape:
        raise ShapeError(f"gradient {g_out.shape} vs activation input {d.shape}")
    if kind.split_derivative and np.iscomplexobj(d):
        return g_out.real * d.real + 1j * (g_out.imag * d.imag)
    return g_out * d


def grad_output_layer(f, v3, yhat, y, mode, kind: ActivationKind, w3):
    """Gradients of the dense layer: returns ``(gW3, gb3, gf)``.

    ``gW3`` is ``(n_out, K_fc)``, ``gb3`` has ``n_out`` entries and ``gf``
    matches ``f``.
    """
    f, w3 = np.asarray(f), np.asarray(w3)
    if w3.ndim != 2 or w3.shape[1] != f.shape[0]:
        raise ShapeError(f"w3 {w3.shape} does not match f {f.shape}")
    g_v3 = activation_backward(kind, loss_grad(y, yhat, mode), v3)
    g_w3 = np.outer(g_v3, np.conj(f))
    g_f = np.conj(w3).T @ g_v3
    return g_w3, g_v3, g_f


def grad_conv2(g_v, s) -> tuple[np.ndarray, np.ndarray]:
    """Kernel and bias gradients of a conv layer given ``grad V`` and its input.

    ``gW[c*n_out+q] = rot180(corr(conj(S[c]), gV[q]))`` and
    ``gb[q] = sum(gV[q])``.
    """
    g_v, s = np.asarray(g_v), np.asarray(s)
    if s.ndim == 2:
        s = s[None]
    if g_v.ndim != 3 or s.ndim != 3:
        raise ShapeError("expected (planes, rows, cols) tensors")
    if g_v.shape[1] > s.shape[1] or g_v.shape[2] > s.shape[2]:
        raise ShapeError(f"grad V {g_v.shape} larger than layer input {s.shape}")
    g_w = rot180(_backend.correlate_pairs(np.conj(s), g_v))
    g_b = g_v.sum(axis=(1, 2))
    return g_w, g_b


def grad_conv1(g_v, x):
    """Same as :func:`grad_conv2`, for the input image (2-D or stacked planes)."""
    return grad_conv2(g_v, x)


def grad_through_conv2(g_v, w) -> np.ndarray:
    """Gradient w.r.t. a conv layer's input: full correlation with ``conj(W)``.

    ``gV`` is zero-padded by ``d-1`` rows and ``e-1`` cols on every side, then
    ``gS[c] = sum_q corr(pad(gV[q]), conj(W[c*n_out+q]))``.
    """
    g_v, w = np.asarray(g_v), np.asarray(w)
    n_out = g_v.shape[0]
    if w.ndim != 3 or w.shape[0] % n_out:
        raise ShapeError(f"{w.shape[0]} kernels for {n_out} output planes")
    n_in, d, e = w.shape[0] // n_out, w.shape[1], w.shape[2]
    padded = pad_planes(g_v, d - 1, e - 1)
    # regroup kernels so plane q*n_in + c holds W[c*n_out + q]
    k = np.conj(w).reshape(n_in, n_out, d, e).transpose(1, 0, 2, 3).reshape(-1, d, e)
    return _backend.correlate_multi(padded, k, n_in)


def residual_backward(res, g_out, kind: ActivationKind):
    """Backward pass of ``out = s + conv_same(act(conv_same(act(s), R1)), R2)``.

    ``res`` is the cache produced by the residual forward pass. Returns
    ``(g_s, g_r1, g_r2)``.
    """
    pad = res.pad
    g_r2, _ = grad_conv2(g_out, pad_planes(res.q, pad, pad))
    g_q = _crop(grad_through_conv2(g_out, res.r2), pad)
    g_p = activation_backward(kind, g_q, res.p)
    g_r1, _ = grad_conv2(g_p, pad_planes(res.a, pad, pad))
    g_a = _crop(grad_through_conv2(g_p, res.r1), pad)
    g_s = g_out + activation_backward(kind, g_a, res.s)
    return g_s, g_r1, g_r2


def _crop(t, pad):
    if pad == 0:
        return t
    return t[..., pad:-pad, pad:-pad]


def backward_sample(params: TensorBundle, cache: ForwardCache, y,
                    mode=LossGradMode.SIGNED) -> GradientSet:
    """Every parameter gradient for one sample, output layer first."""
    if cache is None:
        raise ValueError("backward pass needs the forward cache")
    n_out = params.b2.shape[0]
    g_w3, g_b3, g_f = grad_output_layer(
        cache.f, cache.v3, cache.yhat, y, mode, cache.out_kind, params.w3
    )
    g_s2 = unflatten(g_f, n_out, cache.s2.shape[1], cache.s2.shape[2])
    g_o2 = upsample(g_s2, cache.g, cache.o2.shape)
    g_v2 = activation_backward(cache.kind, g_o2, cache.v2)
    g_w2, g_b2 = grad_conv2(g_v2, cache.t)
    g_t = grad_through_conv2(g_v2, params.w2)

    g_r1 = g_r2 = None
    if cache.res is not None:
        g_s1, g_r1, g_r2 = residual_backward(cache.res, g_t, cache.kind)
    else:
        g_s1 = g_t
    g_o1 = upsample(g_s1, cache.g, cache.o1.shape)
    g_v1 = activation_backward(cache.kind, g_o1, cache.v1)
    g_w1, g_b1 = grad_conv1(g_v1, cache.x)
    return GradientSet(w1=g_w1, b1=g_b1, w2=g_w2, b2=g_b2, w3=g_w3, b3=g_b3,
                       r1=g_r1, r2=g_r2)
