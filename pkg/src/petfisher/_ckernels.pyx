# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled EM and information-matrix kernels.

Mirrors :mod:`petfisher._pykernels` function for function. Loops run in a
fixed order so results are bitwise reproducible for a given build.
"""
import numpy as np

from libc.math cimport fabs


cdef Py_ssize_t _ratio(const double[:, ::1] p, const double[::1] counts,
                       const double[::1] lam, double[::1] g, double[::1] w,
                       double[::1] ratio, double* residual) noexcept nogil:
    # Returns the 0-based index of a detector with counts on zero model
    # mass, or -1.
    cdef Py_ssize_t n_pix = p.shape[0], n_det = p.shape[1]
    cdef Py_ssize_t b, d
    cdef double acc, res = 0.0
    for d in range(n_det):
        g[d] = 0.0
    for b in range(n_pix):
        acc = lam[b]
        if acc != 0.0:
            for d in range(n_det):
                g[d] += p[b, d] * acc
    for d in range(n_det):
        if counts[d] > 0.0:
            if g[d] <= 0.0:
                return d
            w[d] = counts[d] / g[d]
        else:
            w[d] = 0.0
    for b in range(n_pix):
        acc = 0.0
        for d in range(n_det):
            acc += p[b, d] * w[d]
        ratio[b] = acc
        if fabs(acc - 1.0) > res:
            res = fabs(acc - 1.0)
    residual[0] = res
    return -1


cdef Py_ssize_t _run(const double[:, ::1] p, const double[::1] counts,
                     double[::1] lam, double[::1] g, double[::1] w,
                     double[::1] ratio, long n_iter, double tol,
                     long* iterations, int* converged,
                     double* residual) noexcept nogil:
    cdef Py_ssize_t b, bad
    cdef long t = 0
    converged[0] = 0
    while True:
        bad = _ratio(p, counts, lam, g, w, ratio, residual)
        if bad >= 0:
            break
        if residual[0] <= tol:
            converged[0] = 1
            break
        if t >= n_iter:
            break
        for b in range(lam.shape[0]):
            lam[b] = lam[b] * ratio[b]
        t += 1
    iterations[0] = t
    return bad


def em_iterate(p, counts, lam, long n_iter, double tol):
    """Run up to ``n_iter`` EM updates on a copy of ``lam``.

    Returns ``(lam, iterations, converged, residual, bad_detector)``;
    ``bad_detector`` is -1 unless a detector with positive counts had zero
    model mass, in which case ``lam`` holds the last valid iterate.
    """
    cdef const double[:, ::1] pv = np.ascontiguousarray(p, dtype=np.float64)
    cdef const double[::1] cv = np.ascontiguousarray(counts, dtype=np.float64)
    out = np.array(lam, dtype=np.float64, copy=True, order="C")
    cdef double[::1] lv = out
    cdef double[::1] g = np.empty(pv.shape[1])
    cdef double[::1] w = np.empty(pv.shape[1])
    cdef double[::1] ratio = np.empty(pv.shape[0])
    cdef long iterations = 0
    cdef int converged = 0
    cdef double residual = 0.0
    cdef Py_ssize_t bad
    with nogil:
        bad = _run(pv, cv, lv, g, w, ratio, n_iter, tol,
                   &iterations, &converged, &residual)
    return out, int(iterations), bool(converged), float(residual), int(bad)


def em_iterate_batch(p, counts, lam, long n_iter, double tol):
    """Row-wise :func:`em_iterate` over 2-d ``counts`` and ``lam``.

    Returns ``(lam, iterations, converged, residual, bad_detector)`` with one
    entry per row.
    """
    cdef const double[:, ::1] pv = np.ascontiguousarray(p, dtype=np.float64)
    cdef const double[:, ::1] cv = np.ascontiguousarray(counts, dtype=np.float64)
    out = np.array(lam, dtype=np.float64, copy=True, order="C")
    cdef double[:, ::1] lv = out
    cdef Py_ssize_t n_rows = cv.shape[0], r
    iterations_arr = np.zeros(n_rows, dtype=np.int64)
    converged_arr = np.zeros(n_rows, dtype=np.int32)
    residual_arr = np.zeros(n_rows, dtype=np.float64)
    bad_arr = np.full(n_rows, -1, dtype=np.int64)
    cdef long[::1] it_v = iterations_arr
    cdef int[::1] conv_v = converged_arr
    cdef double[::1] res_v = residual_arr
    cdef long[::1] bad_v = bad_arr
    cdef double[::1] g = np.empty(pv.shape[1])
    cdef double[::1] w = np.empty(pv.shape[1])
    cdef double[::1] ratio = np.empty(pv.shape[0])
    with nogil:
        for r in range(n_rows):
            bad_v[r] = _run(pv, cv[r], lv[r], g, w, ratio, n_iter, tol,
                            &it_v[r], &conv_v[r], &res_v[r])
    return out, iterations_arr, converged_arr.astype(bool), residual_arr, bad_arr


def fisher_gram(p, weights):
    """Weighted Gram matrix ``I[i, j] = sum_d p[i, d] p[j, d] weights[d]``."""
    cdef const double[:, ::1] pv = np.ascontiguousarray(p, dtype=np.float64)
    cdef const double[::1] wv = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t n = pv.shape[0], m = pv.shape[1], i, j, d
    out = np.zeros((n, n), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef double acc
    with nogil:
        for i in range(n):
            for j in range(i + 1):
                acc = 0.0
                for d in range(m):
                    acc += pv[i, d] * pv[j, d] * wv[d]
                ov[i, j] = acc
                ov[j, i] = acc
    return out
