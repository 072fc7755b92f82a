"""Network assembly for every variant, the epoch loop, metrics and parameter I/O.

Variants:

``full-cv``
    complex weights and complex arithmetic end to end.
``cv-forward``
    the same complex weights, executed as a real network with twice the
    planes (real planes first). Gradients come from the real-mode backward
    pass and are folded back onto the complex weights.
``cv-residual``
    ``cv-forward`` with one residual block after the first pooling layer.
``rv-split``
    a real network whose first layer sees the real and imaginary input parts
    as two planes.
"""
from __future__ import annotations

import json
import math
import struct
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import simcv
from .backprop import GradientSet, LossGradMode, backward_sample, loss
from .cxcore import NonFiniteError, ShapeError
from .data import Dataset, SplitIndices, split_holdout
from .layers import (
    CRELU,
    SPLIT_SIGMOID,
    ActivationKind,
    ForwardCache,
    LayerShapes,
    NetworkParams,
    TensorBundle,
    avgpool_forward,
    conv_layer_forward,
    dense_forward,
    flatten,
    init_params,
    parse_activation,
)
from .optim import Optimizer

VARIANTS = ("full-cv", "cv-forward", "cv-residual", "rv-split")
CSV_HEADER = "epoch,train_loss,val_loss,test_loss,train_acc,val_acc,test_acc,wall_ms"


@dataclass
class TrainConfig:
    variant: str = "full-cv"
    activation: ActivationKind = CRELU
    loss_grad: LossGradMode = LossGradMode.SIGNED
    lr: float = 1e-3
    momentum: float = 0.0
    weight_decay: float = 0.0
    reg: str | None = None
    batch: int = 10
    epochs: int = 20
    seed: int = 0
    d1: int = 3
    d2: int = 3
    k1: int = 2
    k2: int = 4
    g: int = 2
    residual_kernel: int = 3
    train_frac: float = 0.8
    val_frac: float = 0.0
    early_stop_patience: int | None = None
    threads: int = 1
    wall_time: bool = False

    def __post_init__(self):
        if isinstance(self.activation, str):
            self.activation = parse_activation(self.activation)
        self.loss_grad = LossGradMode(self.loss_grad)
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; pick one of {', '.join(VARIANTS)}")
        for name in ("batch", "epochs", "d1", "d2", "k1", "k2", "g", "threads"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.variant == "full-cv" and self.activation.is_real and self.activation.tag != "identity":
            raise ValueError(f"full-cv needs a complex activation, got {self.activation}")
        if self.variant != "full-cv" and not self.activation.is_real:
            # raises for kinds with no per-channel real form (zrelu)
            self.activation.real_counterpart()
        if self.variant == "cv-residual" and self.residual_kernel % 2 == 0:
            raise ValueError("residual kernel size must be odd")
        if self.early_stop_patience is not None and self.early_stop_patience < 1:
            raise ValueError("early-stop patience must be >= 1")
        # validated here so a bad config fails before any training work
        Optimizer(self.lr, self.momentum, self.weight_decay, self.reg)

    def shapes(self, height: int, width: int) -> LayerShapes:
        return LayerShapes(height, width, self.d1, self.d2, self.k1, self.k2, self.g)

    def to_dict(self, runtime: bool = True) -> dict:
        """Plain-data echo; ``runtime=False`` drops settings that cannot change results."""
        out = asdict(self)
        if not runtime:
            del out["threads"], out["wall_time"]
        out["activation"] = str(self.activation)
        out["loss_grad"] = self.loss_grad.value
        return out


@dataclass
class EpochMetrics:
    epoch: int
    train_loss: float
    val_loss: float
    test_loss: float
    train_acc: float
    val_acc: float
    test_acc: float
    wall_ms: int = 0

    def csv_row(self) -> str:
        vals = [self.train_loss, self.val_loss, self.test_loss,
                self.train_acc, self.val_acc, self.test_acc]
        return ",".join([str(self.epoch), *(_fmt(v) for v in vals), str(self.wall_ms)])


def _fmt(v: float) -> str:
    return "nan" if math.isnan(v) else repr(float(v))


@dataclass
class EvalResult:
    loss: float
    acc: float
    mae: float
    mbe: complex


# --- network assembly -------------------------------------------------------

def new_params(config: TrainConfig, height: int, width: int) -> NetworkParams:
    shapes = config.shapes(height, width)
    if config.variant == "rv-split":
        return init_params(shapes, config.seed, real=True, in_planes=2, variant="rv-split")
    rk = config.residual_kernel if config.variant == "cv-residual" else None
    return init_params(shapes, config.seed, residual_kernel=rk, variant=config.variant)


def _hidden_kind(config: TrainConfig) -> ActivationKind:
    if config.variant == "full-cv":
        return config.activation
    return config.activation.real_counterpart()


def _out_kind(config: TrainConfig) -> ActivationKind:
    if config.variant == "full-cv":
        return SPLIT_SIGMOID
    return SPLIT_SIGMOID.real_counterpart()


def expand_params(params: TensorBundle) -> TensorBundle:
    """Real doubled-channel weights equivalent to complex ``params``."""
    k1, k2 = params.b1.shape[0], params.b2.shape[0]

    def kern(w, n_out):
        return simcv.block_kernels(simcv.SplitKernel.from_complex(w, n_out))

    out = TensorBundle(
        w1=kern(params.w1, k1), b1=simcv.split_vector(params.b1),
        w2=kern(params.w2, k2), b2=simcv.split_vector(params.b2),
        w3=simcv.block_dense(params.w3), b3=simcv.split_vector(params.b3),
    )
    if params.r1 is not None:
        out.r1 = kern(params.r1, k1)
        out.r2 = kern(params.r2, k1)
    return out


def fold_grads(g: TensorBundle, params: TensorBundle) -> GradientSet:
    """Map doubled-channel real gradients back onto the complex weights."""
    k1, k2 = params.b1.shape[0], params.b2.shape[0]
    n_in1 = params.w1.shape[0] // k1
    out = GradientSet(
        w1=simcv.fold_kernel_grad(g.w1, n_in1, k1), b1=simcv.fold_vector(g.b1),
        w2=simcv.fold_kernel_grad(g.w2, k1, k2), b2=simcv.fold_vector(g.b2),
        w3=simcv.fold_dense_grad(g.w3), b3=simcv.fold_vector(g.b3),
    )
    if g.r1 is not None:
        out.r1 = simcv.fold_kernel_grad(g.r1, k1, k1)
        out.r2 = simcv.fold_kernel_grad(g.r2, k1, k1)
    return out


def forward_planes(x, p: TensorBundle, kind: ActivationKind, out_kind: ActivationKind,
                   g: int) -> ForwardCache:
    """Conv1 -> pool -> [residual] -> Conv2 -> pool -> flatten -> dense on plane stacks."""
    v1, o1 = conv_layer_forward(x, p.w1, p.b1, kind)
    s1 = avgpool_forward(o1, g)
    t, res = s1, None
    if p.r1 is not None:
        t, res = simcv.residual_forward_planes(s1, p.r1, p.r2, kind)
    v2, o2 = conv_layer_forward(t, p.w2, p.b2, kind)
    s2 = avgpool_forward(o2, g)
    f = flatten(s2)
    v3, yhat = dense_forward(p.w3, f, p.b3, out_kind)
    return ForwardCache(x=x, v1=v1, o1=o1, s1=s1, t=t, v2=v2, o2=o2, s2=s2, f=f,
                        v3=v3, yhat=yhat, kind=kind, out_kind=out_kind, g=g, res=res)


class Network:
    """Binds a config to its variant-specific input encoding and weight layout."""

    def __init__(self, config: TrainConfig):
        self.config = config
        self.kind = _hidden_kind(config)
        self.out_kind = _out_kind(config)
        self.doubled = config.variant in ("cv-forward", "cv-residual")

    def encode_input(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.complex128)
        if x.ndim != 2:
            raise ShapeError(f"sample must be a matrix, got shape {x.shape}")
        if self.config.variant == "full-cv":
            return x[None]
        return np.stack([x.real, x.imag])

    def target(self, y: int) -> np.ndarray:
        if self.config.variant == "full-cv":
            return np.array([complex(y)])
        if self.doubled:
            return np.array([float(y), 0.0])
        return np.array([float(y)])

    def output(self, yhat) -> complex:
        if self.doubled:
            return complex(yhat[0], yhat[1])
        return complex(yhat[0])

    def run_params(self, params: TensorBundle) -> TensorBundle:
        return expand_params(params) if self.doubled else params

    def forward(self, params: TensorBundle, x, run=None) -> tuple[ForwardCache, complex]:
        run = run if run is not None else self.run_params(params)
        cache = forward_planes(self.encode_input(x), run, self.kind, self.out_kind, self.config.g)
        return cache, self.output(cache.yhat)

    def gradients(self, params: TensorBundle, x, y: int, run=None) -> tuple[GradientSet, complex]:
        run = run if run is not None else self.run_params(params)
        cache, yhat = self.forward(params, x, run)
        grads = backward_sample(run, cache, self.target(y), self.config.loss_grad)
        if self.doubled:
            grads = fold_grads(grads, params)
        return grads, yhat


def forward_sample(params: TensorBundle, x, config: TrainConfig) -> tuple[ForwardCache, complex]:
    return Network(config).forward(params, x)


def predict_class(yhat) -> int:
    """Class 1 when the real part of the output is at least one half."""
    return int(complex(yhat).real >= 0.5)


# --- parallel helpers -------------------------------------------------------

def _map_ordered(fn: Callable, items: Sequence, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(fn, items))


def _sum_ordered(bundles: list[TensorBundle]) -> TensorBundle:
    acc = bundles[0].copy()
    for b in bundles[1:]:
        other = dict(b.items())
        acc = acc.map(lambda name, a: a + other[name])
    return acc


def evaluate(params: TensorBundle, dataset: Dataset, indices, config: TrainConfig,
             net: Network | None = None) -> EvalResult:
    """Mean loss, accuracy, mean absolute error and mean bias error over ``indices``."""
    indices = np.asarray(indices, dtype=np.intp)
    if len(indices) == 0:
        raise ValueError("cannot evaluate on an empty index list")
    net = net or Network(config)
    run = net.run_params(params)
    preds = _map_ordered(lambda i: net.forward(params, dataset.x[i], run)[1],
                         list(indices), config.threads)
    yhat = np.array(preds, dtype=np.complex128)
    y = dataset.y[indices].astype(np.complex128)
    err = y - yhat
    losses = 0.5 * (err.real**2 + err.imag**2)
    acc = np.mean((yhat.real >= 0.5).astype(np.uint8) == dataset.y[indices])
    return EvalResult(loss=float(np.mean(losses)), acc=float(acc),
                      mae=float(np.mean(np.abs(err))), mbe=complex(np.mean(err)))


def epoch_order(train_idx, seed: int, epoch: int) -> np.ndarray:
    """Deterministic per-epoch shuffle of the training indices."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, epoch]))
    return np.asarray(train_idx)[rng.permutation(len(train_idx))]


def _nonfinite(msg, **state):
    err = NonFiniteError(msg)
    err.state = state
    return err


def train_epoch(params: TensorBundle, optimizer: Optimizer, dataset: Dataset,
                splits: SplitIndices, config: TrainConfig, epoch: int = 1,
                net: Network | None = None) -> tuple[TensorBundle, EpochMetrics]:
    """One pass over the shuffled training set, then metrics on every partition.

    Per-sample gradients inside a batch may be computed concurrently; they
    are always summed in batch order so the result does not depend on the
    thread count.
    """
    net = net or Network(config)
    t0 = time.perf_counter()
    order = epoch_order(splits.train, config.seed, epoch)
    batch = min(config.batch, len(order))
    n_train = len(splits.train)
    for b, start in enumerate(range(0, len(order), batch)):
        chunk = list(order[start:start + batch])
        run = net.run_params(params)

        def one(i, run=run, params=params):
            return net.gradients(params, dataset.x[i], int(dataset.y[i]), run)

        results = _map_ordered(one, chunk, config.threads)
        for i, (_, yhat) in zip(chunk, results):
            if not np.isfinite(yhat):
                raise _nonfinite(f"non-finite output at epoch {epoch}, batch {b}, sample {i}",
                                 epoch=epoch, batch=b, sample=int(i), params=params)
        total = _sum_ordered([r[0] for r in results])
        mean = total.map(lambda _, a: a / len(chunk))
        try:
            params = optimizer.step(params, mean, n_train)
        except NonFiniteError as exc:
            raise _nonfinite(f"{exc} (epoch {epoch}, batch {b})",
                             epoch=epoch, batch=b, params=params) from exc
    metrics = _epoch_metrics(params, dataset, splits, config, epoch, net)
    if config.wall_time:
        metrics.wall_ms = int(round((time.perf_counter() - t0) * 1000))
    if not all(math.isfinite(v) for v in (metrics.train_loss, metrics.test_loss)):
        raise _nonfinite(f"non-finite loss after epoch {epoch}", epoch=epoch, params=params)
    return params, metrics


def _epoch_metrics(params, dataset, splits, config, epoch, net) -> EpochMetrics:
    nan = float("nan")

    def ev(idx):
        if len(idx) == 0:
            return nan, nan
        r = evaluate(params, dataset, idx, config, net)
        return r.loss, r.acc

    tr_l, tr_a = ev(splits.train)
    va_l, va_a = ev(splits.val)
    te_l, te_a = ev(splits.test)
    return EpochMetrics(epoch, tr_l, va_l, te_l, tr_a, va_a, te_a)


def early_stop(history: Sequence[float], patience: int) -> bool:
    """True once the running minimum has not improved for ``patience`` epochs."""
    if patience < 1:
        raise ValueError("patience must be >= 1")
    best, stale = math.inf, 0
    for v in history:
        if v < best:
            best, stale = v, 0
        else:
            stale += 1
    return stale >= patience


@dataclass
class FitResult:
    params: NetworkParams
    history: list[EpochMetrics]
    splits: SplitIndices
    initial: NetworkParams = field(repr=False, default=None)


def default_splits(n: int, config: TrainConfig) -> SplitIndices:
    return split_holdout(n, config.train_frac, config.seed, config.val_frac)


def fit(dataset: Dataset, config: TrainConfig, splits: SplitIndices | None = None,
        params: NetworkParams | None = None,
        on_epoch: Callable[[EpochMetrics], None] | None = None) -> FitResult:
    splits = splits if splits is not None else default_splits(len(dataset), config)
    if config.batch > len(splits.train):
        raise ValueError(f"batch {config.batch} exceeds training set size {len(splits.train)}")
    if config.early_stop_patience and len(splits.val) == 0:
        raise ValueError("early stopping needs a validation partition (val_frac > 0)")
    params = params if params is not None else new_params(config, dataset.height, dataset.width)
    initial = params.copy()
    opt = Optimizer(config.lr, config.momentum, config.weight_decay, config.reg)
    net = Network(config)
    history: list[EpochMetrics] = []
    for epoch in range(1, config.epochs + 1):
        params, m = train_epoch(params, opt, dataset, splits, config, epoch, net)
        history.append(m)
        if on_epoch:
            on_epoch(m)
        if config.early_stop_patience and early_stop([h.val_loss for h in history],
                                                      config.early_stop_patience):
            break
    return FitResult(params, history, splits, initial)


def epochs_to_accuracy(history: Iterable[EpochMetrics], target: float = 0.95,
                       which: str = "test") -> int | None:
    """First epoch whose accuracy reaches ``target``, or ``None``."""
    for m in history:
        if getattr(m, f"{which}_acc") >= target:
            return m.epoch
    return None


def cross_validate(dataset: Dataset, k: int, config: TrainConfig, folds=None) -> dict:
    """Fresh seeded network per fold; returns ``{"rows": [...], "mean": {...}}``."""
    from .data import kfold

    folds = folds if folds is not None else kfold(len(dataset), k, config.seed)
    rows = []
    for i, split in enumerate(folds):
        cfg = config
        if config.batch > len(split.train):
            warnings.warn(f"fold {i}: batch clamped to {len(split.train)}", stacklevel=2)
            cfg = TrainConfig(**{**config.__dict__, "batch": len(split.train)})
        res = fit(dataset, cfg, split)
        ev = evaluate(res.params, dataset, split.test, cfg)
        rows.append({"fold": i, "test_loss": ev.loss, "test_acc": ev.acc})
    mean = {key: float(np.mean([r[key] for r in rows])) for key in ("test_loss", "test_acc")}
    return {"rows": rows, "mean": mean}


def count_params(shapes: LayerShapes, real: bool = False, in_planes: int = 1,
                 residual_kernel: int | None = None) -> tuple[int, int]:
    """``(parameter count, real scalar count)`` from the layer shapes alone."""
    s = shapes
    n = (in_planes * s.k1 * s.d1**2 + s.k1
         + s.k1 * s.k2 * s.d2**2 + s.k2
         + s.k_fc + 1)
    if residual_kernel is not None:
        n += 2 * s.k1 * s.k1 * residual_kernel**2
    return n, n if real else 2 * n


# --- file formats -----------------------------------------------------------

def write_metrics_csv(path, history: Iterable[EpochMetrics], variant_rows=None) -> None:
    """Write the metrics CSV (LF endings). ``variant_rows`` adds a leading variant column."""
    lines = []
    if variant_rows is None:
        lines.append(CSV_HEADER)
        lines.extend(m.csv_row() for m in history)
    else:
        lines.append("variant," + CSV_HEADER)
        lines.extend(f"{v},{m.csv_row()}" for v, m in variant_rows)
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")


def read_metrics_csv(path) -> list[EpochMetrics]:
    rows = Path(path).read_text().splitlines()
    if not rows or rows[0] != CSV_HEADER:
        raise ValueError(f"{path}: not a metrics CSV")
    out = []
    for line in rows[1:]:
        e, *vals, wall = line.split(",")
        out.append(EpochMetrics(int(e), *map(float, vals), int(wall)))
    return out


PARAMS_MAGIC = b"CVNP"
PARAMS_VERSION = 1


def save_params(path, params: NetworkParams, meta: dict | None = None) -> None:
    """Exact binary dump: magic, version, JSON index, then raw little-endian arrays.

    ``meta`` (for example the training config) is stored inside the index.
    """
    tensors = []
    blobs = []
    for name, arr in params.items():
        dt = "<c16" if np.iscomplexobj(arr) else "<f8"
        tensors.append({"name": name, "dtype": dt, "shape": list(arr.shape)})
        blobs.append(np.ascontiguousarray(arr, dtype=dt).tobytes())
    index = json.dumps({"variant": params.variant, "tensors": tensors, "meta": meta or {}},
                       sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(PARAMS_MAGIC + struct.pack("<HI", PARAMS_VERSION, len(index)))
        fh.write(index)
        for b in blobs:
            fh.write(b)


def load_params(path) -> NetworkParams:
    return load_params_meta(path)[0]


def load_params_meta(path) -> tuple[NetworkParams, dict]:
    blob = Path(path).read_bytes()
    if blob[:4] != PARAMS_MAGIC:
        raise ValueError(f"{path}: not a parameter file")
    version, n = struct.unpack_from("<HI", blob, 4)
    if version != PARAMS_VERSION:
        raise ValueError(f"{path}: unsupported parameter file version {version}")
    pos = 10
    index = json.loads(blob[pos:pos + n])
    pos += n
    arrays = {}
    for t in index["tensors"]:
        dt = np.dtype(t["dtype"])
        count = int(np.prod(t["shape"]))
        arrays[t["name"]] = np.frombuffer(blob, dt, count, pos).reshape(t["shape"]).copy()
        pos += count * dt.itemsize
    if pos != len(blob):
        raise ValueError(f"{path}: size does not match its index")
    return NetworkParams(variant=index["variant"], **arrays), index.get("meta", {})
