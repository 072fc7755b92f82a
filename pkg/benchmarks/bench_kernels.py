"""Compare the compiled and numpy kernel backends.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]

Times the two correlation kernels at layer-sized shapes and one full
forward+backward sample, for real and complex data, on every backend that
is importable.
"""
import argparse
import timeit

import numpy as np

from cvnet import _backend
from cvnet.data import synth_gestures
from cvnet.train import Network, TrainConfig, new_params

CASES = {
    "conv1 32x24": ((1, 32, 24), (2, 3, 3), 2),
    "conv2 15x11": ((2, 15, 11), (8, 3, 3), 4),
    "conv1 200x120": ((1, 200, 120), (2, 3, 3), 2),
}


def _data(shape, rng, complex_):
    a = rng.standard_normal(shape)
    return a + 1j * rng.standard_normal(shape) if complex_ else a


def bench_kernels(repeat: int):
    rng = np.random.default_rng(0)
    impls = _backend.implementations()
    print(f"{'case':<16}{'dtype':<9}{'op':<10}" + "".join(f"{n:>12}" for n in impls) + "   speedup")
    for name, (xs, ks, n_out) in CASES.items():
        for complex_ in (False, True):
            x, k = _data(xs, rng, complex_), _data(ks, rng, complex_)
            out = _backend.correlate_multi(x, k, n_out)
            g = _data(out.shape, rng, complex_)
            ops = {
                "multi": lambda impl: _backend.correlate_multi(x, k, n_out, impl),
                "pairs": lambda impl: _backend.correlate_pairs(x, g, impl),
            }
            for op, fn in ops.items():
                times = {n: min(timeit.repeat(lambda: fn(m), number=20, repeat=repeat)) / 20
                         for n, m in impls.items()}
                row = "".join(f"{t * 1e6:>10.1f}us" for t in times.values())
                speed = (f"{times['python'] / times['compiled']:8.1f}x"
                         if "compiled" in times else "")
                dt = "complex" if complex_ else "real"
                print(f"{name:<16}{dt:<9}{op:<10}{row}{speed}")


def bench_sample(repeat: int):
    ds = synth_gestures(1, 32, 24, 0.05, seed=0)
    print("\nforward+backward, one 32x24 sample")
    for variant in ("full-cv", "cv-forward", "rv-split"):
        cfg = TrainConfig(variant=variant)
        net, params = Network(cfg), new_params(cfg, 32, 24)
        cells = []
        for name, impl in _backend.implementations().items():
            saved = _backend._impl
            _backend._impl = impl
            try:
                t = min(timeit.repeat(lambda: net.gradients(params, ds.x[0], 0),
                                      number=20, repeat=repeat)) / 20
            finally:
                _backend._impl = saved
            cells.append(f"{name}={t * 1e3:.3f}ms")
        print(f"  {variant:<12}" + "  ".join(cells))


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    a = ap.parse_args()
    print(f"default backend: {_backend.BACKEND}\n")
    bench_kernels(a.repeat)
    bench_sample(a.repeat)
