"""Parameter updates: plain SGD, classical momentum and L1/L2 weight decay.

All functions return new parameter bundles; inputs are never modified.
Complex parameters are updated componentwise, so a real decay factor
scales the real and imaginary parts alike.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .backprop import GradientSet
from .cxcore import NonFiniteError, ShapeError
from .layers import BIAS_NAMES, TensorBundle


def _check_grads(params: TensorBundle, grads: TensorBundle) -> None:
    pshapes, gshapes = params.shapes(), grads.shapes()
    if pshapes != gshapes:
        raise ShapeError(f"gradient shapes {gshapes} do not match parameters {pshapes}")
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"non-finite gradient in {name}; step aborted")


def sgd_step(params: TensorBundle, grads: TensorBundle, lr: float) -> TensorBundle:
    """``p <- p - lr * g`` for every parameter component."""
    _check_grads(params, grads)
    g = dict(grads.items())
    return params.map(lambda name, p: p + (-lr * g[name]))


def momentum_step(params: TensorBundle, grads: TensorBundle, state: "Optimizer") -> TensorBundle:
    """``v <- -lr*g + mu*v``; ``p <- p + v``. Updates ``state.velocity`` in place."""
    _check_grads(params, grads)
    lr, mu = state.lr, state.momentum
    if state.velocity is None:
        state.velocity = GradientSet(**{n: np.zeros_like(a) for n, a in grads.items()})
    vel = dict(state.velocity.items())
    new_v = {}
    for name, g in grads.items():
        step = -lr * g
        new_v[name] = step if mu == 0 else step + mu * vel[name]
    state.velocity = state.velocity.replace(**new_v)
    return params.map(lambda name, p: p + new_v[name])


def _csign(a):
    if np.iscomplexobj(a):
        return np.sign(a.real) + 1j * np.sign(a.imag)
    return np.sign(a)


def apply_weight_decay(params: TensorBundle, lr: float, lam: float, m: int,
                       reg: str | None) -> TensorBundle:
    """Regularization applied to the weights before the gradient step.

    L2 multiplies every weight by ``1 - lr*lam/m``. L1 subtracts
    ``lr*lam/m * sign(w)`` per real component, the same as adding
    ``lam/m * sign(w)`` to the gradient of a plain SGD step. Biases are left
    alone in both cases.
    """
    if reg is None or lam == 0:
        return params
    if m < 1:
        raise ValueError("training-set size must be >= 1")
    rate = lr * lam / m
    if reg == "l2":
        if rate >= 1:
            raise ValueError(f"lr*lambda/M = {rate} >= 1 would flip weight signs")
        factor = 1.0 - rate
        return params.map(lambda name, p: p if name in BIAS_NAMES else factor * p)
    if reg == "l1":
        return params.map(lambda name, p: p if name in BIAS_NAMES else p - rate * _csign(p))
    raise ValueError(f"unknown regularizer {reg!r}")


@dataclass
class Optimizer:
    lr: float
    momentum: float = 0.0
    weight_decay: float = 0.0
    reg: str | None = None
    velocity: GradientSet | None = field(default=None, repr=False)

    def __post_init__(self):
        if not self.lr >= 0:
            raise ValueError("learning rate must be non-negative")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("regularization strength must be >= 0")

    def step(self, params: TensorBundle, grads: TensorBundle, n_train: int = 1) -> TensorBundle:
        params = apply_weight_decay(params, self.lr, self.weight_decay, n_train, self.reg)
        if self.momentum == 0 and self.velocity is None:
            return sgd_step(params, grads, self.lr)
        return momentum_step(params, grads, self)
