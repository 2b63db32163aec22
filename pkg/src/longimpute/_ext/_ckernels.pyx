# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled sparse residual kernels; same contract as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def residual_update(const cnp.intp_t[::1] indptr, const cnp.intp_t[::1] cols,
                    const double[::1] vals, W, B):
    cdef const double[:, ::1] w = np.ascontiguousarray(W, dtype=np.float64)
    cdef const double[:, ::1] b = np.ascontiguousarray(B, dtype=np.float64)
    cdef Py_ssize_t n = w.shape[0], K = w.shape[1]
    if b.shape[1] != K:
        raise ValueError("W and B have different column counts")
    if indptr.shape[0] != n + 1:
        raise ValueError("indptr does not match the row count of W")
    out = np.array(w, dtype=np.float64, copy=True)
    cdef double[:, ::1] g = out
    cdef Py_ssize_t i, e, k, j
    cdef double r, rss = 0.0
    with nogil:
        for i in range(n):
            for e in range(indptr[i], indptr[i + 1]):
                j = cols[e]
                r = vals[e]
                for k in range(K):
                    r -= w[i, k] * b[j, k]
                rss += r * r
                for k in range(K):
                    g[i, k] += r * b[j, k]
    return out, rss
