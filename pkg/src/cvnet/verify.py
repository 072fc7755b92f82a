"""Independent checks: brute-force convolution, finite-difference gradients,
simulated-vs-direct complex convolution and a numerical Cauchy-Riemann test.

None of these reuse the compiled kernels for the quantity they check.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .backprop import loss
from .cxcore import ShapeError, conv_planes
from .layers import TensorBundle
from .simcv import SplitKernel, sim_conv, split_decode, split_encode

ABS_TOL = 1e-8
REL_FLOOR = 1e-12


def conv_oracle(x, k) -> np.ndarray:
    """Valid true convolution as a literal quadruple loop over real and imaginary parts."""
    x, k = np.asarray(x), np.asarray(k)
    if x.ndim != 2 or k.ndim != 2:
        raise ShapeError("conv_oracle takes two matrices")
    a, b = x.shape
    d, e = k.shape
    if d > a or e > b:
        raise ShapeError(f"kernel {k.shape} larger than input {x.shape}")
    xr, xi = x.real.tolist(), np.imag(x).tolist()
    # rot180 by index reversal
    kr = [row[::-1] for row in k.real.tolist()[::-1]]
    ki = [row[::-1] for row in np.imag(k).tolist()[::-1]]
    rows, cols = a - d + 1, b - e + 1
    out_r = [[0.0] * cols for _ in range(rows)]
    out_i = [[0.0] * cols for _ in range(rows)]
    for i in range(rows):
        for j in range(cols):
            sr = si = 0.0
            for u in range(d):
                xru, xiu, kru, kiu = xr[i + u], xi[i + u], kr[u], ki[u]
                for v in range(e):
                    p, q = xru[j + v], xiu[j + v]
                    r, s = kru[v], kiu[v]
                    sr += p * r - q * s
                    si += p * s + q * r
            out_r[i][j] = sr
            out_i[i][j] = si
    out = np.array(out_r) + 1j * np.array(out_i)
    return out if np.iscomplexobj(x) or np.iscomplexobj(k) else out.real


# --- finite-difference gradient check -----------------------------------------

@dataclass
class GradRow:
    tensor: str
    plane: int
    i: int
    j: int
    part: str
    analytic: float
    numeric: float
    rel_err: float

    @property
    def abs_err(self) -> float:
        return abs(self.analytic - self.numeric)


@dataclass
class GradCheckReport:
    rows: list[GradRow]
    h: float
    threshold: float
    warnings: list[str] = field(default_factory=list)

    @property
    def max_rel_err(self) -> float:
        """Largest relative error among rows not already within the absolute tolerance."""
        errs = [r.rel_err for r in self.rows if r.abs_err > ABS_TOL]
        return max(errs, default=0.0)

    @property
    def observed_rel_err(self) -> float:
        """Largest relative error over rows whose gradient is not negligibly small."""
        errs = [r.rel_err for r in self.rows if max(abs(r.analytic), abs(r.numeric)) > ABS_TOL]
        return max(errs, default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.threshold

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# h={self.h:g} threshold={self.threshold:g} "
                  f"max_rel_err={self.max_rel_err:.3e} observed_rel_err={self.observed_rel_err:.3e} "
                  f"pass={int(self.passed)}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["tensor", "plane", "i", "j", "part", "analytic", "numeric", "rel_err"])
        for r in self.rows:
            w.writerow([r.tensor, r.plane, r.i, r.j, r.part,
                        repr(r.analytic), repr(r.numeric), repr(r.rel_err)])
        return buf.getvalue()


def _position(arr: np.ndarray, idx: tuple) -> tuple[int, int, int]:
    if arr.ndim == 3:
        return idx
    if arr.ndim == 2:
        return (0, *idx)
    return (idx[0], 0, 0)


def probe_point(config, height: int, width: int, seed: int):
    """Random parameters, input and label for a gradient check.

    Weights are uniform on [-1, 1] per component so the network sits in a
    non-saturated region; biases are small and the input is complex Gaussian.
    """
    from .train import new_params

    rng = np.random.default_rng(seed)
    params = new_params(config, height, width)

    def draw(name, a):
        scale = 0.1 if name.startswith("b") else 1.0
        lo = -scale
        if np.iscomplexobj(a):
            return rng.uniform(lo, scale, a.shape) + 1j * rng.uniform(lo, scale, a.shape)
        return rng.uniform(lo, scale, a.shape)

    params = params.map(draw)
    x = rng.standard_normal((height, width)) + 1j * rng.standard_normal((height, width))
    return params, x, int(rng.integers(0, 2))


def _near_boundary(cache, margin: float) -> int:
    vals = [cache.v1, cache.v2]
    if cache.res is not None:
        vals += [cache.res.s, cache.res.p]
    n = 0
    for v in vals:
        n += int(np.sum(np.abs(np.real(v)) < margin))
        if np.iscomplexobj(v):
            n += int(np.sum(np.abs(v.imag) < margin))
    return n


def fd_gradcheck(config, seed: int = 0, h: float = 1e-5, threshold: float = 1e-4,
                 height: int = 8, width: int = 7, grad_fn: Callable | None = None,
                 point=None, threads: int = 1) -> GradCheckReport:
    """Central differences over every scalar component of every parameter.

    ``grad_fn(params, x, y)`` may replace the analytic gradient (used to
    confirm that a corrupted gradient is caught). ``point`` overrides the
    random ``(params, x, y)`` probe.
    """
    from .backprop import LossGradMode
    from .train import Network, _map_ordered

    if config.loss_grad is not LossGradMode.SIGNED:
        raise ValueError("gradient checking needs the signed loss gradient")
    if not 1e-7 <= h <= 1e-3:
        raise ValueError(f"step h={h} outside [1e-7, 1e-3]")
    net = Network(config)
    notes = []
    piecewise = config.activation.tag in ("crelu", "zrelu", "relu", "lrelu", "prelu")
    if point is None:
        for attempt in range(200):
            params, x, y = probe_point(config, height, width, seed + 7919 * attempt)
            if not piecewise:
                break
            close = _near_boundary(net.forward(params, x)[0], 1e-3)
            if close == 0:
                break
        if piecewise:
            msg = (f"{config.activation} is piecewise: probe resampled {attempt} time(s) so that"
                   f" no pre-activation component lies within 1e-3 of a kink")
            if close:
                msg = (f"{config.activation}: {close} pre-activation component(s) remain within"
                       " 1e-3 of a kink; finite differences there are unreliable")
            notes.append(msg)
    else:
        params, x, y = point
    for n in notes:
        warnings.warn(n, stacklevel=2)

    if grad_fn is None:
        grads = net.gradients(params, x, y)[0]
    else:
        grads = grad_fn(params, x, y)
    grad_map = dict(grads.items())
    target = complex(y)

    def loss_at(p):
        yhat = net.forward(p, x)[1]
        val = loss(target, yhat)
        if not math.isfinite(val):
            raise FloatingPointError("non-finite loss while probing")
        return val

    jobs = []
    for name, arr in params.items():
        parts = [("re", 1.0)] + ([("im", 1j)] if np.iscomplexobj(arr) else [])
        for idx in np.ndindex(arr.shape):
            for part, unit in parts:
                jobs.append((name, idx, part, unit))
    arrays = dict(params.items())

    def probe(job):
        name, idx, part, unit = job
        arr = arrays[name]

        def shifted(sign):
            b = arr.copy()
            b[idx] += sign * h * unit
            return params.replace(**{name: b})

        numeric = (loss_at(shifted(1)) - loss_at(shifted(-1))) / (2 * h)
        g = grad_map[name][idx]
        analytic = float(g.real if part == "re" else np.imag(g))
        rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), REL_FLOOR)
        plane, i, j = _position(arr, idx)
        return GradRow(name, int(plane), int(i), int(j), part, analytic, float(numeric), rel)

    rows = _map_ordered(probe, jobs, threads)
    return GradCheckReport(rows, h, threshold, notes)


# --- simulated complex convolution -------------------------------------------

@dataclass
class EquivResult:
    trials: int
    max_rel_err: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_err <= self.tolerance


def _rel_err(a, b) -> float:
    """Elementwise relative error, floored at the output's own scale times 1e-3."""
    scale = max(float(np.max(np.abs(b))), 1e-300)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-3 * scale)))


def sim_equiv_check(trials: int = 1000, seed: int = 0, tolerance: float = 1e-12) -> EquivResult:
    """Random stacks and kernels: four-real-convolution result vs direct complex conv."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        n_in, n_out = rng.integers(1, 4, size=2)
        rows, cols = rng.integers(1, 11, size=2)
        d, e = rng.integers(1, rows + 1), rng.integers(1, cols + 1)
        d, e = min(d, 4), min(e, 4)
        h = rng.standard_normal((n_in, rows, cols)) + 1j * rng.standard_normal((n_in, rows, cols))
        w = (rng.standard_normal((n_in * n_out, d, e))
             + 1j * rng.standard_normal((n_in * n_out, d, e)))
        direct = conv_planes(h, w, int(n_out))
        sim = split_decode(sim_conv(split_encode(h), SplitKernel.from_complex(w, int(n_out))))
        worst = max(worst, _rel_err(sim, direct))
    return EquivResult(trials, worst, tolerance)


# --- Cauchy-Riemann -----------------------------------------------------------

@dataclass
class CRPoint:
    z: complex
    du_dr: float
    dv_dq: float
    du_dq: float
    dv_dr: float
    passed: bool


def cauchy_riemann_check(fn: Callable[[complex], complex], points, h: float = 1e-6,
                         tol: float = 1e-5) -> list[CRPoint]:
    """Central-difference partials of ``u + jv = fn(r + jq)`` and both CR equalities.

    Mismatches are measured relative to ``max(1, |partials|)`` so rapidly
    growing functions are judged on the same footing as small ones.
    """
    out = []
    for z in points:
        z = complex(z)
        fr = (complex(fn(z + h)) - complex(fn(z - h))) / (2 * h)
        fq = (complex(fn(z + 1j * h)) - complex(fn(z - 1j * h))) / (2 * h)
        du_dr, dv_dr = fr.real, fr.imag
        du_dq, dv_dq = fq.real, fq.imag
        scale = max(1.0, abs(du_dr), abs(dv_dq), abs(du_dq), abs(dv_dr))
        ok = abs(du_dr - dv_dq) <= tol * scale and abs(du_dq + dv_dr) <= tol * scale
        out.append(CRPoint(z, du_dr, dv_dq, du_dq, dv_dr, ok))
    return out


def bundle_allclose(a: TensorBundle, b: TensorBundle, atol: float) -> bool:
    bm = dict(b.items())
    return all(np.allclose(arr, bm[n], rtol=0, atol=atol) for n, arr in a.items())
