# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled bank kernels.

Generic kernels walk the CSR support lists.  The `_lineage` variants exploit
sub-mask closure of enumerated banks: each feature's support minus its last
pixel is an earlier feature, so products and phase angles build incrementally
from per-pixel tables with no per-feature trig.  Rows are independent; outer
loops parallelize with OpenMP without changing results."""

import numpy as np

from cython.parallel cimport prange, threadid
cimport openmp
from libc.math cimport cos

cdef extern from *:
    """
    #include <math.h>
    #if defined(__GLIBC__)
    static inline void harmclf_sincos(double x, double *s, double *c) { sincos(x, s, c); }
    #else
    static inline void harmclf_sincos(double x, double *s, double *c) { *s = sin(x); *c = cos(x); }
    #endif
    """
    void harmclf_sincos(double x, double *s, double *c) nogil

BACKEND = "compiled"


def cos_design(double[:, ::1] X, long long[::1] indptr,
               long long[::1] indices, double[::1] values):
    cdef Py_ssize_t N = X.shape[0], n = X.shape[1], K = indptr.shape[0] - 1
    out_arr = np.empty((N, K), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef int nt = openmp.omp_get_max_threads()
    cdef double[:, ::1] ctab = np.empty((nt, n), dtype=np.float64)
    cdef Py_ssize_t i, k, t, p
    cdef int tid
    cdef double prod, v
    with nogil:
        for i in prange(N, schedule='static'):
            tid = threadid()
            for p in range(n):
                ctab[tid, p] = cos(X[i, p])
            for k in range(K):
                prod = 1.0
                for t in range(indptr[k], indptr[k + 1]):
                    v = values[t]
                    if v == 1.0:
                        prod = prod * ctab[tid, indices[t]]
                    else:
                        prod = prod * cos(v * X[i, indices[t]])
                out[i, k] = prod
    return out_arr


DEF SQRT2 = 1.4142135623730951


def cos_design_lineage(double[:, ::1] X, long long[::1] prefix,
                       long long[::1] last, long long[::1] sizes,
                       double[::1] scales):
    """Whitened orthonormal cosine products (amplitude sqrt(2) per active
    component) by prefix-chain recurrence; no per-feature trig."""
    cdef Py_ssize_t N = X.shape[0], n = X.shape[1], K = prefix.shape[0]
    out_arr = np.empty((N, K), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef int nt = openmp.omp_get_max_threads()
    cdef double[:, ::1] ctab = np.empty((nt, n), dtype=np.float64)
    cdef Py_ssize_t i, k, p
    cdef int tid
    with nogil:
        for i in prange(N, schedule='static'):
            tid = threadid()
            for p in range(n):
                ctab[tid, p] = cos(X[i, p])
            for k in range(K):
                if prefix[k] < 0:
                    out[i, k] = SQRT2 * ctab[tid, last[k]] / scales[k]
                else:
                    out[i, k] = (out[i, prefix[k]] * scales[prefix[k]]
                                 * SQRT2 * ctab[tid, last[k]]) / scales[k]
    return out_arr


def holo_design_lineage(double[:, ::1] X, long long[::1] prefix,
                        long long[::1] last, long long[::1] sizes,
                        double[::1] scales):
    """Whitened complex exponentials exp(i * support-sum) / scale by
    angle-addition along the prefix chain."""
    cdef Py_ssize_t N = X.shape[0], n = X.shape[1], K = prefix.shape[0]
    out_arr = np.empty((N, K), dtype=np.complex128)
    cdef double complex[:, ::1] out = out_arr
    cdef int nt = openmp.omp_get_max_threads()
    cdef double[:, ::1] ctab = np.empty((nt, n), dtype=np.float64)
    cdef double[:, ::1] stab = np.empty((nt, n), dtype=np.float64)
    cdef Py_ssize_t i, k, p, pf
    cdef int tid
    with nogil:
        for i in prange(N, schedule='static'):
            tid = threadid()
            for p in range(n):
                harmclf_sincos(X[i, p], &stab[tid, p], &ctab[tid, p])
            for k in range(K):
                p = last[k]
                pf = prefix[k]
                if pf < 0:
                    out[i, k] = (ctab[tid, p] + 1j * stab[tid, p]) / scales[k]
                else:
                    out[i, k] = (out[i, pf] * scales[pf]
                                 * (ctab[tid, p] + 1j * stab[tid, p])) / scales[k]
    return out_arr


def phase_design(double[:, ::1] X, long long[::1] indptr,
                 long long[::1] indices, double[::1] values):
    cdef Py_ssize_t N = X.shape[0], K = indptr.shape[0] - 1
    cos_arr = np.empty((N, K), dtype=np.float64)
    sin_arr = np.empty((N, K), dtype=np.float64)
    cdef double[:, ::1] cbuf = cos_arr
    cdef double[:, ::1] sbuf = sin_arr
    cdef Py_ssize_t i, k, t
    cdef double ph
    with nogil:
        for i in prange(N, schedule='static'):
            for k in range(K):
                ph = 0.0
                for t in range(indptr[k], indptr[k + 1]):
                    ph = ph + values[t] * X[i, indices[t]]
                # sincos writes straight into the row; pointer outputs must
                # never target scalars here (they would be shared, not private)
                harmclf_sincos(ph, &sbuf[i, k], &cbuf[i, k])
    return cos_arr, sin_arr


def cos_input_grad(double[:, ::1] X, long long[::1] indptr,
                   long long[::1] indices, double[::1] values,
                   double[:, ::1] G):
    cdef Py_ssize_t N = X.shape[0], n = X.shape[1], K = indptr.shape[0] - 1
    cdef Py_ssize_t smax = 1, k
    for k in range(K):
        if indptr[k + 1] - indptr[k] > smax:
            smax = indptr[k + 1] - indptr[k]
    out_arr = np.zeros((N, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef int nt = openmp.omp_get_max_threads()
    cdef double[:, ::1] ctab = np.empty((nt, n), dtype=np.float64)
    cdef double[:, ::1] stab = np.empty((nt, n), dtype=np.float64)
    cdef double[:, ::1] cm = np.empty((nt, smax), dtype=np.float64)
    cdef double[:, ::1] sm = np.empty((nt, smax), dtype=np.float64)
    cdef double[:, ::1] pref = np.empty((nt, smax), dtype=np.float64)
    cdef Py_ssize_t i, t, p, base, sk
    cdef int tid
    cdef double v, g, run
    with nogil:
        for i in prange(N, schedule='static'):
            tid = threadid()
            for p in range(n):
                harmclf_sincos(X[i, p], &stab[tid, p], &ctab[tid, p])
            for k in range(K):
                g = G[i, k]
                if g == 0.0:
                    continue
                base = indptr[k]
                sk = indptr[k + 1] - base
                run = 1.0
                for t in range(sk):
                    v = values[base + t]
                    p = indices[base + t]
                    if v == 1.0:
                        cm[tid, t] = ctab[tid, p]
                        sm[tid, t] = stab[tid, p]
                    else:
                        # pointer outputs go to thread-owned slots, never to
                        # scalars (scalars written via pointer stay shared)
                        harmclf_sincos(v * X[i, p], &sm[tid, t], &cm[tid, t])
                    pref[tid, t] = run
                    run = run * cm[tid, t]
                run = 1.0
                for t in range(sk - 1, -1, -1):
                    v = values[base + t]
                    out[i, indices[base + t]] += g * (-v * sm[tid, t]) * pref[tid, t] * run
                    run = run * cm[tid, t]
    return out_arr


def phase_input_grad(Py_ssize_t n, long long[::1] indptr,
                     long long[::1] indices, double[::1] values,
                     double[:, ::1] E):
    cdef Py_ssize_t N = E.shape[0], K = indptr.shape[0] - 1
    out_arr = np.zeros((N, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, k, t
    cdef double e
    with nogil:
        for i in prange(N, schedule='static'):
            for k in range(K):
                e = E[i, k]
                if e == 0.0:
                    continue
                for t in range(indptr[k], indptr[k + 1]):
                    out[i, indices[t]] += e * values[t]
    return out_arr


def holo_input_grad(Py_ssize_t n, long long[::1] indptr,
                    long long[::1] indices, double[::1] values,
                    double complex[:, ::1] QW, double complex[:, ::1] PSI):
    """d Re(sum_k qw[i,k] * psi[i,k] * scale_k * e-phase-derivative)/dx.

    With psi the whitened features, the per-feature phase coefficient is
    e = -Im(qw * psi); whitening scales cancel.  Scatters e * frequency onto
    each support pixel."""
    cdef Py_ssize_t N = QW.shape[0], K = indptr.shape[0] - 1
    out_arr = np.zeros((N, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, k, t
    cdef double e
    cdef double complex z
    with nogil:
        for i in prange(N, schedule='static'):
            for k in range(K):
                z = QW[i, k] * PSI[i, k]
                e = -z.imag
                if e == 0.0:
                    continue
                for t in range(indptr[k], indptr[k + 1]):
                    out[i, indices[t]] += e * values[t]
    return out_arr
