# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot numeric kernels.

Semantics match ``_purepy`` exactly up to floating-point summation order;
the test suite cross-checks the two backends.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log

cnp.import_array()

BACKEND_NAME = "compiled"


def pairwise_sq_dists(a, b):
    """Squared Euclidean distances between the rows of two matrices."""
    cdef double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[:, ::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t n = av.shape[0], m = bv.shape[0], d = av.shape[1]
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, j, k
    cdef double acc, diff
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for k in range(d):
                diff = av[i, k] - bv[j, k]
                acc += diff * diff
            ov[i, j] = acc
    return out


def assign_nearest(points, centroids):
    """Nearest-centroid assignment; ties go to the lowest centroid index."""
    cdef double[:, ::1] pv = np.ascontiguousarray(points, dtype=np.float64)
    cdef double[:, ::1] cv = np.ascontiguousarray(centroids, dtype=np.float64)
    cdef Py_ssize_t n = pv.shape[0], c = cv.shape[0], d = pv.shape[1]
    labels = np.empty(n, dtype=np.int64)
    dists = np.empty(n, dtype=np.float64)
    cdef long long[::1] lv = labels
    cdef double[::1] dv = dists
    cdef Py_ssize_t i, j, k, best
    cdef double acc, diff, bestd
    for i in range(n):
        best = 0
        bestd = -1.0
        for j in range(c):
            acc = 0.0
            for k in range(d):
                diff = pv[i, k] - cv[j, k]
                acc += diff * diff
            if bestd < 0.0 or acc < bestd:
                bestd = acc
                best = j
        lv[i] = best
        dv[i] = bestd
    return labels, dists


cdef void _log_mean_exp_rows(double[:, ::1] a, bint exclude_diag,
                             double[::1] out, double[:, ::1] w) noexcept:
    """Row-wise log-mean-exp with softmax weights; optional diagonal skip."""
    cdef Py_ssize_t n = a.shape[0], m = a.shape[1]
    cdef Py_ssize_t i, j
    cdef double mx, s
    cdef Py_ssize_t count = m - 1 if exclude_diag else m
    for i in range(n):
        mx = -1e300
        for j in range(m):
            if exclude_diag and j == i:
                continue
            if a[i, j] > mx:
                mx = a[i, j]
        s = 0.0
        for j in range(m):
            if exclude_diag and j == i:
                w[i, j] = 0.0
                continue
            w[i, j] = exp(a[i, j] - mx)
            s += w[i, j]
        for j in range(m):
            w[i, j] /= s
        out[i] = mx + log(s) - log(<double>count)


def kl_divergence_loss_grad(p0, p1, double h, bint compute_grad=True):
    """Symmetrized kernel-density KL estimate and its point gradients.

    See the pure NumPy backend for the definition; h is treated as a
    constant when differentiating.
    """
    cdef double[:, ::1] x0 = np.ascontiguousarray(p0, dtype=np.float64)
    cdef double[:, ::1] x1 = np.ascontiguousarray(p1, dtype=np.float64)
    cdef Py_ssize_t n0 = x0.shape[0], n1 = x1.shape[0], d = x0.shape[1]
    cdef double hh = h * h
    cdef double inv2 = -1.0 / (2.0 * hh)
    cdef Py_ssize_t i, j, k

    a00 = np.asarray(pairwise_sq_dists(p0, p0)) * inv2
    a01 = np.asarray(pairwise_sq_dists(p0, p1)) * inv2
    a11 = np.asarray(pairwise_sq_dists(p1, p1)) * inv2
    a10 = np.ascontiguousarray(a01.T)
    cdef double[:, ::1] a00v = a00, a01v = a01, a11v = a11, a10v = a10

    l00 = np.empty(n0)
    l01 = np.empty(n0)
    l11 = np.empty(n1)
    l10 = np.empty(n1)
    w00 = np.empty((n0, n0))
    w01 = np.empty((n0, n1))
    w11 = np.empty((n1, n1))
    w10 = np.empty((n1, n0))
    cdef double[::1] l00v = l00, l01v = l01, l11v = l11, l10v = l10
    cdef double[:, ::1] w00v = w00, w01v = w01, w11v = w11, w10v = w10

    _log_mean_exp_rows(a00v, True, l00v, w00v)
    _log_mean_exp_rows(a01v, False, l01v, w01v)
    _log_mean_exp_rows(a11v, True, l11v, w11v)
    _log_mean_exp_rows(a10v, False, l10v, w10v)

    cdef double loss = 0.0
    for i in range(n0):
        loss += (l00v[i] - l01v[i]) / n0
    for i in range(n1):
        loss += (l11v[i] - l10v[i]) / n1
    if not compute_grad:
        return loss, None, None

    g0 = np.zeros((n0, d))
    g1 = np.zeros((n1, d))
    cdef double[:, ::1] g0v = g0, g1v = g1
    cdef double c, diff

    # Self-density terms: each ordered pair pushes its endpoints apart or
    # together with weight w_ij / (n * hh).
    for i in range(n0):
        for j in range(n0):
            if j == i:
                continue
            c = w00v[i, j] / (n0 * hh)
            for k in range(d):
                diff = x0[j, k] - x0[i, k]
                g0v[i, k] += c * diff
                g0v[j, k] -= c * diff
    for i in range(n1):
        for j in range(n1):
            if j == i:
                continue
            c = w11v[i, j] / (n1 * hh)
            for k in range(d):
                diff = x1[j, k] - x1[i, k]
                g1v[i, k] += c * diff
                g1v[j, k] -= c * diff
    # Cross-density terms enter the loss negatively.
    for i in range(n0):
        for j in range(n1):
            c = w01v[i, j] / (n0 * hh)
            for k in range(d):
                diff = x1[j, k] - x0[i, k]
                g0v[i, k] -= c * diff
                g1v[j, k] += c * diff
    for i in range(n1):
        for j in range(n0):
            c = w10v[i, j] / (n1 * hh)
            for k in range(d):
                diff = x0[j, k] - x1[i, k]
                g1v[i, k] -= c * diff
                g0v[j, k] += c * diff
    return loss, g0, g1
