# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled pair-traversal kernels.

Semantics mirror ``_kernels_py``: one pass over the unordered pair list with
symmetric accumulation, sequential order, single thread.  The sequential loop
keeps results bitwise deterministic.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


cdef void _apply_vec(const long[::1] ii, const long[::1] jj, const double[::1] w,
                     const double[::1] x, double[::1] out) noexcept nogil:
    cdef Py_ssize_t k, i, j
    for k in range(ii.shape[0]):
        i = ii[k]
        j = jj[k]
        out[i] += w[k] * x[j]
        if i != j:
            out[j] += w[k] * x[i]


cdef void _apply_mat(const long[::1] ii, const long[::1] jj, const double[::1] w,
                     const double[:, ::1] x, double[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t k, i, j, c
    cdef Py_ssize_t r = x.shape[1]
    cdef double wk
    for k in range(ii.shape[0]):
        i = ii[k]
        j = jj[k]
        wk = w[k]
        for c in range(r):
            out[i, c] += wk * x[j, c]
        if i != j:
            for c in range(r):
                out[j, c] += wk * x[i, c]


cdef void _gram_vec(const long[::1] ii, const long[::1] jj, const double[::1] w,
                    const double[::1] x, double[::1] out) noexcept nogil:
    cdef Py_ssize_t k, i, j
    cdef double g
    for k in range(ii.shape[0]):
        i = ii[k]
        j = jj[k]
        g = x[i] * x[j] * w[k]
        out[i] += g * x[j]
        if i != j:
            out[j] += g * x[i]


cdef void _gram_mat(const long[::1] ii, const long[::1] jj, const double[::1] w,
                    const double[:, ::1] x, double[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t k, i, j, c
    cdef Py_ssize_t r = x.shape[1]
    cdef double g
    for k in range(ii.shape[0]):
        i = ii[k]
        j = jj[k]
        g = 0.0
        for c in range(r):
            g += x[i, c] * x[j, c]
        g *= w[k]
        for c in range(r):
            out[i, c] += g * x[j, c]
        if i != j:
            for c in range(r):
                out[j, c] += g * x[i, c]


def pair_apply(ii, jj, w, x):
    """Apply the symmetric matrix with value w[k] on pair (ii[k], jj[k]) to x."""
    out = np.zeros_like(x)
    if x.ndim == 1:
        _apply_vec(ii, jj, w, x, out)
    else:
        _apply_mat(ii, jj, w, x, out)
    return out


def pair_gram_apply(ii, jj, w, x):
    """Apply the masked Gram matrix of x, scaled per pair by w, to x itself."""
    out = np.zeros_like(x)
    if x.ndim == 1:
        _gram_vec(ii, jj, w, x, out)
    else:
        _gram_mat(ii, jj, w, x, out)
    return out


def pair_sq_rowsums(ii, jj, w, x):
    """Weighted row sums of squares: out[i] = sum_k w[k] * x[j]^2 over pairs."""
    out = np.zeros_like(x)
    cdef const long[::1] iv = ii
    cdef const long[::1] jv = jj
    cdef const double[::1] wv = w
    cdef const double[::1] xv = x
    cdef double[::1] ov = out
    cdef Py_ssize_t k, i, j
    with nogil:
        for k in range(iv.shape[0]):
            i = iv[k]
            j = jv[k]
            ov[i] += wv[k] * xv[j] * xv[j]
            if i != j:
                ov[j] += wv[k] * xv[i] * xv[i]
    return out


def pair_loss_sq(ii, jj, x, x_ref, e):
    """Sum of squared residuals over the symmetric sample set; off-diagonal
    pairs count twice."""
    cdef const long[::1] iv = ii
    cdef const long[::1] jv = jj
    cdef const double[::1] ev = e
    cdef const double[::1] xv
    cdef const double[:, ::1] xm
    cdef const double[::1] sv
    cdef const double[:, ::1] sm
    cdef Py_ssize_t k, i, j, c, r
    cdef double acc = 0.0
    cdef double resid
    if x.ndim == 1:
        xv = x
        sv = x_ref
        with nogil:
            for k in range(iv.shape[0]):
                i = iv[k]
                j = jv[k]
                resid = xv[i] * xv[j] - sv[i] * sv[j] - ev[k]
                if i != j:
                    acc += 2.0 * resid * resid
                else:
                    acc += resid * resid
    else:
        xm = x
        sm = x_ref
        r = x.shape[1]
        with nogil:
            for k in range(iv.shape[0]):
                i = iv[k]
                j = jv[k]
                resid = -ev[k]
                for c in range(r):
                    resid += xm[i, c] * xm[j, c] - sm[i, c] * sm[j, c]
                if i != j:
                    acc += 2.0 * resid * resid
                else:
                    acc += resid * resid
    return acc
