"""``cvnet`` command-line interface.

Exit codes: 0 success, 1 verification failure, 2 usage or configuration
error, 3 numerical failure. Machine-readable output (CSV) goes to files or
stdout; diagnostics go to stderr.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__, data, train, verify
from .cxcore import NonFiniteError, ShapeError

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _err(msg: str) -> None:
    print(f"cvnet: {msg}", file=sys.stderr)


def _threads(value) -> int:
    if value is None:
        value = os.environ.get("CVNET_THREADS", "1")
    try:
        n = int(value)
    except ValueError as exc:
        raise UsageError(f"thread count must be an integer, got {value!r}") from exc
    if n < 1:
        raise UsageError("thread count must be >= 1")
    return n


# --- training options ---------------------------------------------------------

# flag -> (TrainConfig field, type); defaults live in TrainConfig
TRAIN_OPTIONS = {
    "variant": ("variant", str),
    "activation": ("activation", str),
    "loss-grad": ("loss_grad", str),
    "lr": ("lr", float),
    "momentum": ("momentum", float),
    "weight-decay": ("weight_decay", float),
    "reg": ("reg", str),
    "batch": ("batch", int),
    "epochs": ("epochs", int),
    "seed": ("seed", int),
    "d1": ("d1", int),
    "d2": ("d2", int),
    "k1": ("k1", int),
    "k2": ("k2", int),
    "pool": ("g", int),
    "residual-kernel": ("residual_kernel", int),
    "train-frac": ("train_frac", float),
    "val-frac": ("val_frac", float),
    "early-stop": ("early_stop_patience", int),
}


def _add_train_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value file; command-line flags take precedence")
    p.add_argument("--kernel", type=int, help="sets both --d1 and --d2")
    for flag, (_, typ) in TRAIN_OPTIONS.items():
        p.add_argument(f"--{flag}", type=typ, default=None)
    p.add_argument("--threads", default=None, help="worker threads (default CVNET_THREADS or 1)")
    p.add_argument("--wall-time", action="store_true",
                   help="record per-epoch wall time (makes the CSV run-dependent)")


def read_config_file(path) -> dict[str, str]:
    out = {}
    for n, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{n}: expected key=value")
        out[key.strip().replace("_", "-")] = value.strip()
    return out


def build_config(args) -> train.TrainConfig:
    file_vals = read_config_file(args.config) if args.config else {}
    unknown = set(file_vals) - set(TRAIN_OPTIONS) - {"kernel", "threads"}
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    kw = {}
    kernel = args.kernel if args.kernel is not None else file_vals.get("kernel")
    if kernel is not None:
        kw["d1"] = kw["d2"] = int(kernel)
    for flag, (name, typ) in TRAIN_OPTIONS.items():
        value = getattr(args, flag.replace("-", "_"))
        if value is None and flag in file_vals:
            value = typ(file_vals[flag])
        if value is not None:
            kw[name] = value
    if kw.get("reg") in ("none", ""):
        kw["reg"] = None
    threads = args.threads if args.threads is not None else file_vals.get("threads")
    kw["threads"] = _threads(threads)
    kw["wall_time"] = bool(getattr(args, "wall_time", False))
    return train.TrainConfig(**kw)


def _manifest(config: train.TrainConfig, ds: data.Dataset, extra=None) -> dict:
    return {
        "config": config.to_dict(),
        "dataset": data.fingerprint(ds),
        "version": __version__,
        "seed": config.seed,
        "started": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        **(extra or {}),
    }


def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _dump_failure(exc: NonFiniteError, out_dir: Path | None) -> None:
    state = getattr(exc, "state", {})
    _err(f"numerical failure: {exc}")
    if out_dir is not None and "params" in state:
        path = out_dir / "params.failed.cvnp"
        train.save_params(path, state["params"])
        _err(f"parameters at failure written to {path}")


# --- commands -----------------------------------------------------------------

def cmd_synth(args) -> int:
    if args.classes != 2:
        raise UsageError("only two-class data is supported")
    ds = data.synth_gestures(args.per_class, args.height, args.width, args.noise, args.seed)
    data.cvds_write(ds, args.out)
    print(f"wrote {len(ds)} samples ({ds.height}x{ds.width}, {args.per_class} per class) "
          f"to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_convert(args) -> int:
    """Pre-extracted Doppler-time matrices in ``.npz`` -> CVDS, zero-padded on the right."""
    with np.load(args.input, allow_pickle=False) as z:
        if "y" not in z:
            raise UsageError("input archive needs a 'y' label array")
        labels = z["y"]
        if "x" in z:
            raw = list(z["x"])
        else:
            keys = sorted((k for k in z.files if k.startswith("x_")), key=lambda k: int(k[2:]))
            raw = [z[k] for k in keys]
    if len(raw) != len(labels):
        raise UsageError(f"{len(raw)} matrices but {len(labels)} labels")
    width = args.width or max(np.shape(m)[1] for m in raw)
    ds = data.pad_uniform(raw, labels, width, name=Path(args.input).stem)
    data.cvds_write(ds, args.out)
    print(f"wrote {len(ds)} samples ({ds.height}x{ds.width}) to {args.out}", file=sys.stderr)
    return EXIT_OK


def _out_paths(args):
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return (out_dir, Path(args.metrics or out_dir / "metrics.csv"),
            Path(args.params or out_dir / "params.cvnp"),
            Path(args.manifest or out_dir / "manifest.json"))


def cmd_train(args) -> int:
    config = build_config(args)
    ds = data.cvds_read(args.data)
    out_dir, metrics_path, params_path, manifest_path = _out_paths(args)
    config.shapes(ds.height, ds.width)  # fail early on collapsing shapes
    manifest = _manifest(config, ds)
    _write_json(manifest_path, manifest)
    params0 = train.new_params(config, ds.height, ds.width)
    if args.save_init:
        train.save_params(args.save_init, params0, config.to_dict(runtime=False))
    history = []
    try:
        res = train.fit(ds, config, params=params0, on_epoch=lambda m: (
            history.append(m),
            print(f"epoch {m.epoch}: train_loss={m.train_loss:.6g} test_acc={m.test_acc:.4g}",
                  file=sys.stderr)))
    except NonFiniteError as exc:
        train.write_metrics_csv(metrics_path, history)
        _dump_failure(exc, out_dir)
        return EXIT_NUMERIC
    train.write_metrics_csv(metrics_path, res.history)
    train.save_params(params_path, res.params, config.to_dict(runtime=False))
    manifest["finished"] = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    manifest["epochs_run"] = len(res.history)
    _write_json(manifest_path, manifest)
    return EXIT_OK


def cmd_eval(args) -> int:
    params, meta = train.load_params_meta(args.params)
    if not meta:
        raise UsageError(f"{args.params} carries no training config")
    meta = {**meta, "threads": _threads(args.threads)}
    config = train.TrainConfig(**meta)
    ds = data.cvds_read(args.data)
    if args.split == "all":
        idx = np.arange(len(ds))
    else:
        splits = train.default_splits(len(ds), config)
        idx = getattr(splits, args.split)
    r = train.evaluate(params, ds, idx, config)
    print("split,count,loss,acc,mae,mbe_re,mbe_im")
    print(f"{args.split},{len(idx)},{r.loss!r},{r.acc!r},{r.mae!r},{r.mbe.real!r},{r.mbe.imag!r}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    config = train.TrainConfig(
        variant=args.variant, activation=args.activation, d1=args.kernel, d2=args.kernel,
        k1=args.k1, k2=args.k2, g=args.pool, residual_kernel=args.residual_kernel,
    )
    threads = _threads(args.threads)
    ok = True
    out = sys.stdout if args.report is None else open(args.report, "w", newline="\n")
    try:
        for seed in range(args.seed, args.seed + args.seeds):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                rep = verify.fd_gradcheck(config, seed, args.h, args.threshold,
                                          args.height, args.width, threads=threads)
            for note in rep.warnings:
                _err(f"warning: {note}")
            out.write(f"# seed={seed} variant={config.variant} activation={config.activation} "
                      f"input={args.height}x{args.width}\n")
            out.write(rep.to_csv())
            status = "PASS" if rep.passed else "FAIL"
            _err(f"seed {seed}: {status} max_rel_err={rep.max_rel_err:.3e} "
                 f"(observed {rep.observed_rel_err:.3e}, threshold {args.threshold:g})")
            ok &= rep.passed
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_sim_equiv(args) -> int:
    r = verify.sim_equiv_check(args.trials, args.seed, args.tolerance)
    print("trials,max_rel_err,tolerance,pass")
    print(f"{r.trials},{r.max_rel_err!r},{r.tolerance!r},{int(r.passed)}")
    return EXIT_OK if r.passed else EXIT_VERIFY


CR_FUNCTIONS = {
    "z2": lambda z: z * z,
    "exp": np.exp,
    "conj": np.conj,
    "abs2": lambda z: abs(z) ** 2,
    "crelu": lambda z: complex(max(z.real, 0.0), max(z.imag, 0.0)),
}


def cmd_cr_check(args) -> int:
    fn = CR_FUNCTIONS[args.fn]
    if args.at:
        points = [complex(p.replace(" ", "")) for p in args.at]
    else:
        rng = np.random.default_rng(args.seed)
        points = rng.uniform(-2, 2, args.points) + 1j * rng.uniform(-2, 2, args.points)
    rows = verify.cauchy_riemann_check(fn, points, args.h, args.tol)
    print("re,im,du_dr,dv_dq,du_dq,dv_dr,pass")
    for r in rows:
        print(f"{r.z.real!r},{r.z.imag!r},{r.du_dr!r},{r.dv_dq!r},{r.du_dq!r},{r.dv_dr!r},"
              f"{int(r.passed)}")
    n_pass = sum(r.passed for r in rows)
    _err(f"{args.fn}: {n_pass}/{len(rows)} points satisfy the Cauchy-Riemann equations")
    if args.expect == "pass" and n_pass != len(rows):
        return EXIT_VERIFY
    if args.expect == "fail" and n_pass != 0:
        return EXIT_VERIFY
    return EXIT_OK


def cmd_compare(args) -> int:
    base = build_config(args)
    ds = data.cvds_read(args.data)
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    for v in variants:
        if v not in train.VARIANTS:
            raise UsageError(f"unknown variant {v!r}")
    configs = {v: train.TrainConfig(**{**base.__dict__, "variant": v,
                                       "activation": base.activation}) for v in variants}
    for c in configs.values():
        c.shapes(ds.height, ds.width)
    if args.manifest:
        _write_json(args.manifest, _manifest(base, ds, {
            "variants": variants, "seeds": {v: c.seed for v, c in configs.items()}}))
    histories = {}
    for v, c in configs.items():
        try:
            histories[v] = train.fit(ds, c).history
        except NonFiniteError as exc:
            _err(f"{v}: numerical failure: {exc}")
            return EXIT_NUMERIC
    rows = []
    for epoch in range(max(len(h) for h in histories.values())):
        for v in variants:
            if epoch < len(histories[v]):
                rows.append((v, histories[v][epoch]))
    if args.out:
        train.write_metrics_csv(args.out, None, rows)
    else:
        sys.stdout.write("variant," + train.CSV_HEADER + "\n")
        for v, m in rows:
            sys.stdout.write(f"{v},{m.csv_row()}\n")
    for v in variants:
        e = train.epochs_to_accuracy(histories[v], args.target)
        shown = e if e is not None else "not reached"
        _err(f"{v}: epochs to {args.target:.0%} test accuracy: {shown}")
    return EXIT_OK


# --- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cvnet", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"cvnet {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic two-class gesture set")
    s.add_argument("--classes", type=int, default=2)
    s.add_argument("--per-class", type=int, default=100)
    s.add_argument("--height", type=int, default=32)
    s.add_argument("--width", type=int, default=24)
    s.add_argument("--noise", type=float, default=0.05)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("convert", help="pack pre-extracted matrices (.npz) into CVDS")
    s.add_argument("--input", required=True,
                   help="npz with 'y' plus either a 3-D 'x' or arrays x_0, x_1, ...")
    s.add_argument("--width", type=int, default=None, help="pad target (default: widest)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_convert)

    s = sub.add_parser("train", help="train one variant and write metrics and parameters")
    s.add_argument("--data", required=True)
    s.add_argument("--out-dir", default=".")
    s.add_argument("--metrics")
    s.add_argument("--params")
    s.add_argument("--manifest")
    s.add_argument("--save-init", help="also write the initial parameters here")
    _add_train_options(s)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="evaluate saved parameters on a dataset")
    s.add_argument("--data", required=True)
    s.add_argument("--params", required=True)
    s.add_argument("--split", choices=("all", "train", "val", "test"), default="all")
    s.add_argument("--threads", default=None)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("gradcheck", help="finite-difference check of every gradient component")
    s.add_argument("--variant", default="full-cv", choices=train.VARIANTS)
    s.add_argument("--activation", default="split-sigmoid")
    s.add_argument("--height", type=int, default=8)
    s.add_argument("--width", type=int, default=7)
    s.add_argument("--kernel", type=int, default=2)
    s.add_argument("--k1", type=int, default=2)
    s.add_argument("--k2", type=int, default=2)
    s.add_argument("--pool", type=int, default=2)
    s.add_argument("--residual-kernel", type=int, default=3)
    s.add_argument("--h", type=float, default=1e-5)
    s.add_argument("--threshold", type=float, default=1e-4)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds")
    s.add_argument("--report", help="CSV report path (default stdout)")
    s.add_argument("--threads", default=None)
    s.set_defaults(func=cmd_gradcheck)

    s = sub.add_parser("sim-equiv", help="four-real-convolution vs direct complex convolution")
    s.add_argument("--trials", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--tolerance", type=float, default=1e-12)
    s.set_defaults(func=cmd_sim_equiv)

    s = sub.add_parser("cr-check", help="numerical Cauchy-Riemann test of a built-in function")
    s.add_argument("--fn", choices=sorted(CR_FUNCTIONS), required=True)
    s.add_argument("--points", type=int, default=100)
    s.add_argument("--at", nargs="+", help="explicit points such as 1+2j")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--h", type=float, default=1e-6)
    s.add_argument("--tol", type=float, default=1e-5)
    s.add_argument("--expect", choices=("pass", "fail"),
                   help="exit 1 unless every point has this outcome")
    s.set_defaults(func=cmd_cr_check)

    s = sub.add_parser("compare", help="train several variants under one config")
    s.add_argument("--data", required=True)
    s.add_argument("--variants", default="full-cv,cv-forward,rv-split")
    s.add_argument("--out", help="CSV path (default stdout)")
    s.add_argument("--manifest")
    s.add_argument("--target", type=float, default=0.95)
    _add_train_options(s)
    s.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NonFiniteError as exc:
        _err(f"numerical failure: {exc}")
        return EXIT_NUMERIC
    except (UsageError, ShapeError, ValueError, OSError, KeyError) as exc:
        _err(str(exc))
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
