"""Forward passes for the two-convolution network and its activation functions.

Network layout (per sample)::

    I -> Conv1 (K1 kernels, d1 x d1) -> act -> avg-pool g
      -> Conv2 (K1*K2 kernels, d2 x d2) -> act -> avg-pool g
      -> column-major flatten -> dense (1 x K_fc) -> output sigmoid

Every function works on complex128 arrays (complex mode) or float64 arrays
(real mode). Kernel stacks for a layer with ``n_in`` input planes and
``n_out`` output planes hold ``n_in * n_out`` planes; the plane feeding output
``q`` from input ``c`` is at index ``c * n_out + q``.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .cxcore import ShapeError, as_tensor, check_finite, conv_planes

REAL_TAGS = ("relu", "lrelu", "prelu", "elu", "sigmoid", "tanh", "identity")
COMPLEX_TAGS = ("crelu", "zrelu", "split-sigmoid", "split-tanh")


@dataclass(frozen=True)
class ActivationKind:
    """Activation tag plus its fixed shape parameter.

    ``alpha`` is the negative-side slope for lrelu/prelu and the scale for
    elu. ``crelu_deriv`` picks the CReLU derivative: ``"same-sign"`` passes the
    gradient only where both parts share a sign, ``"split"`` differentiates
    each part's ReLU separately.
    """

    tag: str
    alpha: float = 0.01
    crelu_deriv: str = "same-sign"

    def __post_init__(self):
        if self.tag not in REAL_TAGS + COMPLEX_TAGS:
            raise ValueError(f"unknown activation {self.tag!r}")
        if not np.isfinite(self.alpha):
            raise ValueError("activation parameter must be finite")
        if self.crelu_deriv not in ("same-sign", "split"):
            raise ValueError(f"unknown CReLU derivative mode {self.crelu_deriv!r}")

    @property
    def is_real(self) -> bool:
        return self.tag in REAL_TAGS

    @property
    def split_derivative(self) -> bool:
        """True when the derivative acts on real and imaginary parts separately."""
        if self.tag == "crelu":
            return self.crelu_deriv == "split"
        return self.tag in ("split-sigmoid", "split-tanh")

    def real_counterpart(self) -> "ActivationKind":
        """The per-channel real activation that a split complex one reduces to."""
        mapping = {"crelu": "relu", "split-sigmoid": "sigmoid", "split-tanh": "tanh"}
        if self.is_real:
            return self
        if self.tag not in mapping:
            raise ValueError(f"{self.tag} has no per-channel real form")
        return ActivationKind(mapping[self.tag], self.alpha)

    def __str__(self):
        if self.tag == "crelu" and self.crelu_deriv == "split":
            return "crelu-split"
        if self.tag in ("lrelu", "prelu", "elu"):
            return f"{self.tag}:{self.alpha:g}"
        return self.tag


def parse_activation(text: str) -> ActivationKind:
    """Parse ``crelu``, ``crelu-split``, ``lrelu:0.1``, ``elu:1`` and friends."""
    text = text.strip().lower()
    if text == "crelu-split":
        return ActivationKind("crelu", crelu_deriv="split")
    tag, _, param = text.partition(":")
    if param:
        return ActivationKind(tag, float(param))
    if tag == "elu":
        return ActivationKind(tag, 1.0)
    return ActivationKind(tag)


CRELU = ActivationKind("crelu")
SPLIT_SIGMOID = ActivationKind("split-sigmoid")


def _sigmoid(x):
    # two-branch form avoids overflow in exp for large |x|
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _real_fn(tag: str, alpha: float, x: np.ndarray) -> np.ndarray:
    if tag == "relu":
        return np.where(x >= 0, x, 0.0)
    if tag in ("lrelu", "prelu"):
        return np.where(x >= 0, x, alpha * x)
    if tag == "elu":
        return np.where(x >= 0, x, alpha * np.expm1(np.minimum(x, 0.0)))
    if tag == "sigmoid":
        return _sigmoid(x)
    if tag == "tanh":
        return np.tanh(x)
    if tag == "identity":
        return x.copy()
    raise ValueError(tag)


def _real_deriv(tag: str, alpha: float, x: np.ndarray) -> np.ndarray:
    if tag == "relu":
        return (x > 0).astype(np.float64)
    if tag in ("lrelu", "prelu"):
        return np.where(x >= 0, 1.0, alpha)
    if tag == "elu":
        return np.where(x >= 0, 1.0, alpha * np.exp(np.minimum(x, 0.0)))
    if tag == "sigmoid":
        s = _sigmoid(x)
        return s * (1.0 - s)
    if tag == "tanh":
        return 1.0 - np.tanh(x) ** 2
    if tag == "identity":
        return np.ones_like(x, dtype=np.float64)
    raise ValueError(tag)


def _real_tag(kind: ActivationKind) -> str:
    if kind.is_real:
        return kind.tag
    return {"crelu": "relu", "zrelu": "relu", "split-sigmoid": "sigmoid",
            "split-tanh": "tanh"}[kind.tag]


def _check_real_mode(kind: ActivationKind, v: np.ndarray) -> None:
    if kind.is_real and kind.tag != "identity" and np.iscomplexobj(v) and np.any(v.imag != 0):
        raise ValueError(f"real activation {kind.tag} applied to complex input")


def activation(kind: ActivationKind, v) -> np.ndarray:
    v = np.asarray(v)
    _check_real_mode(kind, v)
    if kind.tag == "identity":
        return v.copy()
    if not np.iscomplexobj(v):
        # float arrays carry no imaginary channel
        return _real_fn(_real_tag(kind), kind.alpha, v)
    if kind.is_real:
        return _real_fn(kind.tag, kind.alpha, v.real).astype(np.complex128)
    re, im = v.real, v.imag
    if kind.tag == "crelu":
        return np.maximum(re, 0.0) + 1j * np.maximum(im, 0.0)
    if kind.tag == "zrelu":
        return np.where((re >= 0) & (im >= 0), v, 0.0)
    if kind.tag == "split-sigmoid":
        return _sigmoid(re) + 1j * _sigmoid(im)
    if kind.tag == "split-tanh":
        return np.tanh(re) + 1j * np.tanh(im)
    raise ValueError(kind.tag)


def activation_deriv(kind: ActivationKind, v) -> np.ndarray:
    """Derivative of ``activation`` at ``v``.

    For split kinds the result packs the two per-part derivatives as
    ``d_re + j*d_im``; for the others it is a real scalar field (imag 0).
    How the value is applied to an upstream gradient is decided by
    :attr:`ActivationKind.split_derivative`.
    """
    v = np.asarray(v)
    _check_real_mode(kind, v)
    if kind.tag == "identity":
        return np.ones(v.shape, dtype=v.dtype)
    if not np.iscomplexobj(v):
        return _real_deriv(_real_tag(kind), kind.alpha, v)
    if kind.is_real:
        return _real_deriv(kind.tag, kind.alpha, v.real).astype(np.complex128)
    re, im = v.real, v.imag
    if kind.tag == "crelu":
        if kind.crelu_deriv == "same-sign":
            same_sign = ((re > 0) & (im > 0)) | ((re < 0) & (im < 0))
            return same_sign.astype(np.complex128)
        return (re > 0) + 1j * (im > 0)
    if kind.tag == "zrelu":
        return ((re >= 0) & (im >= 0) & (v != 0)).astype(np.complex128)
    if kind.tag == "split-sigmoid":
        return _real_deriv("sigmoid", 0, re) + 1j * _real_deriv("sigmoid", 0, im)
    if kind.tag == "split-tanh":
        return _real_deriv("tanh", 0, re) + 1j * _real_deriv("tanh", 0, im)
    raise ValueError(kind.tag)


@dataclass(frozen=True)
class LayerShapes:
    """Input size, kernel sizes/counts and pooling window, with derived dims.

    Pooled dims use floor division, so trailing rows/cols that do not fill a
    whole window are dropped.
    """

    alpha: int
    beta: int
    d1: int = 3
    d2: int = 3
    k1: int = 2
    k2: int = 4
    g: int = 2

    def __post_init__(self):
        for name in ("alpha", "beta", "d1", "d2", "k1", "k2", "g"):
            if int(getattr(self, name)) < 1:
                raise ShapeError(f"{name} must be >= 1")
        dims = {
            "alpha_v1": self.alpha_v1, "beta_v1": self.beta_v1,
            "alpha_s1": self.alpha_s1, "beta_s1": self.beta_s1,
            "alpha_v2": self.alpha_v2, "beta_v2": self.beta_v2,
            "alpha_s2": self.alpha_s2, "beta_s2": self.beta_s2,
        }
        bad = {k: v for k, v in dims.items() if v < 1}
        if bad:
            raise ShapeError(f"input {self.alpha}x{self.beta} collapses: {bad}")

    alpha_v1 = property(lambda s: s.alpha - s.d1 + 1)
    beta_v1 = property(lambda s: s.beta - s.d1 + 1)
    alpha_s1 = property(lambda s: s.alpha_v1 // s.g)
    beta_s1 = property(lambda s: s.beta_v1 // s.g)
    alpha_v2 = property(lambda s: s.alpha_s1 - s.d2 + 1)
    beta_v2 = property(lambda s: s.beta_s1 - s.d2 + 1)
    alpha_s2 = property(lambda s: s.alpha_v2 // s.g)
    beta_s2 = property(lambda s: s.beta_v2 // s.g)

    @property
    def k_fc(self) -> int:
        return self.alpha_s2 * self.beta_s2 * self.k2


def conv_layer_forward(x, kernels, biases, kind: ActivationKind):
    """One convolutional layer: ``V[q] = sum_c x[c] (*) W[c,q] + b[q]``, ``O = act(V)``.

    ``x`` is ``(n_in, rows, cols)``; returns ``(V, O)`` with ``len(biases)``
    planes each.
    """
    x = as_tensor(x)
    biases = np.asarray(biases)
    n_out = biases.shape[0]
    kernels = as_tensor(kernels)
    if kernels.shape[0] != x.shape[0] * n_out:
        raise ShapeError(
            f"{kernels.shape[0]} kernels do not match {x.shape[0]} inputs x {n_out} biases"
        )
    v = conv_planes(x, kernels, n_out) + biases[:, None, None]
    return v, activation(kind, v)


def avgpool_forward(o, g: int) -> np.ndarray:
    """Non-overlapping ``g x g`` mean pooling over the last two axes (floor dims)."""
    o = np.asarray(o)
    if g < 1:
        raise ShapeError("pooling window must be >= 1")
    rows, cols = o.shape[-2] // g, o.shape[-1] // g
    if rows == 0 or cols == 0:
        raise ShapeError(f"pooling {o.shape[-2:]} by {g} leaves nothing")
    core = o[..., : rows * g, : cols * g]
    blocks = core.reshape(o.shape[:-2] + (rows, g, cols, g))
    return blocks.sum(axis=(-3, -1)) / (g * g)


def flatten(planes) -> np.ndarray:
    """Scan each plane column by column and concatenate planes in order."""
    planes = np.asarray(planes)
    if planes.ndim != 3:
        raise ShapeError("flatten expects (planes, rows, cols)")
    return np.concatenate([p.ravel(order="F") for p in planes])


def unflatten(v, n_planes: int, rows: int, cols: int) -> np.ndarray:
    """Inverse of :func:`flatten`."""
    v = np.asarray(v)
    if v.shape != (n_planes * rows * cols,):
        raise ShapeError(f"vector of length {v.shape} cannot fill {n_planes}x{rows}x{cols}")
    return np.stack(
        [chunk.reshape((rows, cols), order="F") for chunk in np.split(v, n_planes)]
    )


def dense_forward(w, f, b, kind: ActivationKind):
    """``V3 = w @ f + b`` and ``yhat = act(V3)``.

    ``w`` is ``(n_out, K_fc)`` (a single row for the scalar-output network)
    and ``b`` has ``n_out`` entries.
    """
    w, f, b = np.asarray(w), np.asarray(f), np.asarray(b)
    if w.ndim != 2 or w.shape[1] != f.shape[0] or b.shape != (w.shape[0],):
        raise ShapeError(f"dense layer shapes w={w.shape} f={f.shape} b={b.shape}")
    v3 = w @ f + b
    return v3, activation(kind, v3)


# --- parameter containers -------------------------------------------------

TENSOR_ORDER = ("w1", "b1", "w2", "b2", "r1", "r2", "w3", "b3")
BIAS_NAMES = frozenset({"b1", "b2", "b3"})


@dataclass
class TensorBundle:
    """Named arrays mirroring the network's parameters.

    ``r1``/``r2`` are the residual-block kernels and stay ``None`` for the
    plain two-layer network.
    """

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray
    r1: np.ndarray | None = None
    r2: np.ndarray | None = None

    def items(self):
        for name in TENSOR_ORDER:
            arr = getattr(self, name)
            if arr is not None:
                yield name, arr

    def replace(self, **arrays):
        return dataclasses.replace(self, **arrays)

    def map(self, fn):
        return self.replace(**{name: fn(name, arr) for name, arr in self.items()})

    def copy(self):
        return self.map(lambda _, a: a.copy())

    def shapes(self):
        return {name: arr.shape for name, arr in self.items()}

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.w1)


@dataclass
class NetworkParams(TensorBundle):
    variant: str = "full-cv"


def init_params(
    shapes: LayerShapes,
    seed: int,
    *,
    real: bool = False,
    in_planes: int = 1,
    residual_kernel: int | None = None,
    variant: str | None = None,
) -> NetworkParams:
    """Weights i.i.d. uniform on [0, 1] per component, biases zero.

    ``real=True`` produces float64 weights (imaginary part fixed at zero).
    ``in_planes`` is the number of conv1 input planes (2 for the real
    baseline that stacks the real and imaginary input channels).
    """
    rng = np.random.default_rng(seed)
    dtype = np.float64 if real else np.complex128

    def draw(*shape):
        re = rng.random(shape)
        if real:
            return re
        return re + 1j * rng.random(shape)

    k1, k2 = shapes.k1, shapes.k2
    params = NetworkParams(
        w1=draw(in_planes * k1, shapes.d1, shapes.d1),
        b1=np.zeros(k1, dtype),
        w2=draw(k1 * k2, shapes.d2, shapes.d2),
        b2=np.zeros(k2, dtype),
        w3=draw(1, shapes.k_fc),
        b3=np.zeros(1, dtype),
        variant=variant or ("rv-split" if real else "full-cv"),
    )
    if residual_kernel is not None:
        params.r1 = draw(k1 * k1, residual_kernel, residual_kernel)
        params.r2 = draw(k1 * k1, residual_kernel, residual_kernel)
    return params


@dataclass
class ForwardCache:
    """Intermediates of one forward pass, kept for the backward pass.

    ``t`` is the tensor fed into conv2: ``s1`` itself for the plain network,
    the residual block's output otherwise (with its own cache in ``res``).
    """

    x: np.ndarray
    v1: np.ndarray
    o1: np.ndarray
    s1: np.ndarray
    t: np.ndarray
    v2: np.ndarray
    o2: np.ndarray
    s2: np.ndarray
    f: np.ndarray
    v3: np.ndarray
    yhat: np.ndarray
    kind: ActivationKind
    out_kind: ActivationKind
    g: int
    res: Any = field(default=None)

    def check(self):
        for name in ("v1", "o1", "s1", "v2", "o2", "s2", "f", "v3", "yhat"):
            check_finite(getattr(self, name), name)
        return self
