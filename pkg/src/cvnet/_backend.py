"""Kernel backend selection.

The compiled extension is preferred. ``CVNET_BACKEND`` may be set to
``python`` to force the numpy fallback, or ``compiled`` to fail loudly when
the extension is missing.
"""
import os

import numpy as np

from . import _kernels_py

_requested = os.environ.get("CVNET_BACKEND", "auto").lower()

if _requested == "python":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        if _requested == "compiled":
            raise
        _impl = _kernels_py
        BACKEND = "python"


def _prepare(*arrays):
    dtype = np.result_type(*arrays)
    dtype = np.complex128 if np.issubdtype(dtype, np.complexfloating) else np.float64
    return [np.ascontiguousarray(a, dtype=dtype) for a in arrays]


def correlate_multi(x, k, n_out, impl=None):
    x, k = _prepare(x, k)
    return (impl or _impl).correlate_multi(x, k, n_out)


def correlate_pairs(x, g, impl=None):
    x, g = _prepare(x, g)
    return (impl or _impl).correlate_pairs(x, g)


def implementations():
    """Every available backend module keyed by name (for benchmarks/tests)."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels  # type: ignore[attr-defined]

        out["compiled"] = _kernels
    except ImportError:
        pass
    return out
