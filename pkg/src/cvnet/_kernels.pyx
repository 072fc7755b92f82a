# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled sliding-window kernels.

Both functions accumulate in a fixed loop order so results are reproducible
run to run. The GIL is released around the inner loops. Complex arrays are
processed through interleaved float64 views with explicit real/imaginary
arithmetic.
"""
import numpy as np


cdef void _multi_real(const double[:, :, ::1] x, const double[:, :, ::1] k,
                      double[:, :, ::1] o, Py_ssize_t n_out) noexcept nogil:
    cdef Py_ssize_t n_in = x.shape[0], d = k.shape[1], e = k.shape[2]
    cdef Py_ssize_t ho = o.shape[1], wo = o.shape[2]
    cdef Py_ssize_t q, c, u, v, i, j
    cdef double w
    for q in range(n_out):
        for c in range(n_in):
            for u in range(d):
                for v in range(e):
                    w = k[c * n_out + q, u, v]
                    for i in range(ho):
                        for j in range(wo):
                            o[q, i, j] += x[c, i + u, j + v] * w


cdef void _multi_cplx(const double[:, :, ::1] x, const double[:, :, ::1] k,
                      double[:, :, ::1] o, Py_ssize_t n_out) noexcept nogil:
    # last axis interleaves (re, im)
    cdef Py_ssize_t n_in = x.shape[0], d = k.shape[1], e = k.shape[2] // 2
    cdef Py_ssize_t ho = o.shape[1], wo = o.shape[2] // 2
    cdef Py_ssize_t q, c, u, v, i, j, p
    cdef double wr, wi, xr, xi
    for q in range(n_out):
        for c in range(n_in):
            for u in range(d):
                for v in range(e):
                    wr = k[c * n_out + q, u, 2 * v]
                    wi = k[c * n_out + q, u, 2 * v + 1]
                    for i in range(ho):
                        for j in range(wo):
                            p = 2 * (j + v)
                            xr = x[c, i + u, p]
                            xi = x[c, i + u, p + 1]
                            o[q, i, 2 * j] += xr * wr - xi * wi
                            o[q, i, 2 * j + 1] += xr * wi + xi * wr


cdef void _pairs_real(const double[:, :, ::1] x, const double[:, :, ::1] g,
                      double[:, :, ::1] o) noexcept nogil:
    cdef Py_ssize_t n_in = x.shape[0], n_out = g.shape[0]
    cdef Py_ssize_t h = g.shape[1], w = g.shape[2], d = o.shape[1], e = o.shape[2]
    cdef Py_ssize_t c, q, u, v, i, j
    cdef double acc
    for c in range(n_in):
        for q in range(n_out):
            for u in range(d):
                for v in range(e):
                    acc = 0.0
                    for i in range(h):
                        for j in range(w):
                            acc += x[c, i + u, j + v] * g[q, i, j]
                    o[c * n_out + q, u, v] = acc


cdef void _pairs_cplx(const double[:, :, ::1] x, const double[:, :, ::1] g,
                      double[:, :, ::1] o) noexcept nogil:
    cdef Py_ssize_t n_in = x.shape[0], n_out = g.shape[0]
    cdef Py_ssize_t h = g.shape[1], w = g.shape[2] // 2
    cdef Py_ssize_t d = o.shape[1], e = o.shape[2] // 2
    cdef Py_ssize_t c, q, u, v, i, j, p
    cdef double ar, ai, xr, xi, gr, gi
    for c in range(n_in):
        for q in range(n_out):
            for u in range(d):
                for v in range(e):
                    ar = 0.0
                    ai = 0.0
                    for i in range(h):
                        for j in range(w):
                            p = 2 * (j + v)
                            xr = x[c, i + u, p]
                            xi = x[c, i + u, p + 1]
                            gr = g[q, i, 2 * j]
                            gi = g[q, i, 2 * j + 1]
                            ar += xr * gr - xi * gi
                            ai += xr * gi + xi * gr
                    o[c * n_out + q, u, 2 * v] = ar
                    o[c * n_out + q, u, 2 * v + 1] = ai


def correlate_multi(x, k, Py_ssize_t n_out):
    """``out[q] = sum_c corr_valid(x[c], k[c * n_out + q])``."""
    ho = x.shape[1] - k.shape[1] + 1
    wo = x.shape[2] - k.shape[2] + 1
    out = np.zeros((n_out, ho, wo), dtype=x.dtype)
    if x.dtype == np.complex128:
        _run_multi(x.view(np.float64), k.view(np.float64), out.view(np.float64), n_out, True)
    else:
        _run_multi(x, k, out, n_out, False)
    return out


def correlate_pairs(x, g):
    """``out[c * n_out + q] = corr_valid(x[c], g[q])`` for every plane pair."""
    d = x.shape[1] - g.shape[1] + 1
    e = x.shape[2] - g.shape[2] + 1
    out = np.zeros((x.shape[0] * g.shape[0], d, e), dtype=x.dtype)
    if x.dtype == np.complex128:
        _run_pairs(x.view(np.float64), g.view(np.float64), out.view(np.float64), True)
    else:
        _run_pairs(x, g, out, False)
    return out


cdef _run_multi(const double[:, :, ::1] x, const double[:, :, ::1] k, double[:, :, ::1] o,
                Py_ssize_t n_out, bint cplx):
    with nogil:
        if cplx:
            _multi_cplx(x, k, o, n_out)
        else:
            _multi_real(x, k, o, n_out)


cdef _run_pairs(const double[:, :, ::1] x, const double[:, :, ::1] g, double[:, :, ::1] o,
                bint cplx):
    with nogil:
        if cplx:
            _pairs_cplx(x, g, o)
        else:
            _pairs_real(x, g, o)
