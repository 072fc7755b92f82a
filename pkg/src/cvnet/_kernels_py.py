"""Pure-numpy fallback for the compiled kernels in ``_kernels.pyx``.

Same signatures and contracts; used when the extension is not built or
``CVNET_BACKEND=python`` is set.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def correlate_multi(x, k, n_out):
    """``out[q] = sum_c corr_valid(x[c], k[c * n_out + q])``."""
    n_in = x.shape[0]
    d, e = k.shape[1], k.shape[2]
    win = sliding_window_view(x, (d, e), axis=(1, 2))
    kk = k.reshape(n_in, n_out, d, e)
    return np.ascontiguousarray(np.einsum("chwuv,cquv->qhw", win, kk))


def correlate_pairs(x, g):
    """``out[c * n_out + q] = corr_valid(x[c], g[q])`` for every plane pair."""
    n_in, n_out = x.shape[0], g.shape[0]
    h, w = g.shape[1], g.shape[2]
    win = sliding_window_view(x, (h, w), axis=(1, 2))
    out = np.einsum("cuvij,qij->cquv", win, g)
    return np.ascontiguousarray(out.reshape(n_in * n_out, out.shape[2], out.shape[3]))
