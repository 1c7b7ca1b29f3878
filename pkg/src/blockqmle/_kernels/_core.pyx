# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled implementation of the per-block numeric kernels.

Same interface as ``_pure``: banded Cholesky of the merged block
covariance, quadratic form / log-determinant accumulation, the sparse
gradient contractions (band-restricted inverse via the Takahashi
recursion), interval overlaps and the square-root-process Euler loop.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport NAN, fabs, log, sqrt

BACKEND = "core"


cdef int _band_cholesky(double[:, ::1] ab, Py_ssize_t l, Py_ssize_t w) noexcept nogil:
    """In-place lower banded Cholesky; returns 1 if a pivot is not positive."""
    cdef Py_ssize_t j, k, i, m
    cdef double ajj, ljk
    for j in range(l):
        ajj = ab[0, j]
        if not (ajj > 0.0):
            return 1
        ajj = sqrt(ajj)
        ab[0, j] = ajj
        m = l - 1 - j
        if m > w:
            m = w
        for k in range(1, m + 1):
            ab[k, j] /= ajj
        for k in range(1, m + 1):
            ljk = ab[k, j]
            if ljk != 0.0:
                for i in range(k, m + 1):
                    ab[i - k, j + k] -= ab[i, j] * ljk
    return 0


cdef void _forward_solve(double[:, ::1] lb, double[::1] x, Py_ssize_t l, Py_ssize_t w) noexcept nogil:
    cdef Py_ssize_t i, k, m
    cdef double s
    for i in range(l):
        s = x[i]
        m = i if i < w else w
        for k in range(1, m + 1):
            s -= lb[k, i - k] * x[i - k]
        x[i] = s / lb[0, i]


cdef void _backward_solve(double[:, ::1] lb, double[::1] x, Py_ssize_t l, Py_ssize_t w) noexcept nogil:
    cdef Py_ssize_t i, k, m
    cdef double s
    for i in range(l - 1, -1, -1):
        s = x[i]
        m = l - 1 - i
        if m > w:
            m = w
        for k in range(1, m + 1):
            s -= lb[k, i] * x[i + k]
        x[i] = s / lb[0, i]


cdef void _takahashi_band(double[:, ::1] lb, double[:, ::1] zb, Py_ssize_t l, Py_ssize_t w) noexcept nogil:
    """Band of the inverse from the banded Cholesky factor.

    Backward recursion over columns; for banded matrices the equations
    restricted to the band are closed, so the band of the inverse is exact.
    """
    cdef Py_ssize_t i, k, t, mi, a, b
    cdef double s, lpt, dii
    for i in range(l - 1, -1, -1):
        mi = l - 1 - i
        if mi > w:
            mi = w
        dii = lb[0, i]
        for k in range(mi, -1, -1):
            if k == 0:
                s = 1.0 / (dii * dii)
            else:
                s = 0.0
            for t in range(1, mi + 1):
                lpt = lb[t, i] / dii
                if lpt != 0.0:
                    a = i + t
                    b = i + k
                    if a >= b:
                        s -= lpt * zb[a - b, b]
                    else:
                        s -= lpt * zb[b - a, a]
            zb[k, i] = s


cdef void _fill_band(double[:, ::1] ab,
                     long[::1] pos1, long[::1] pos2,
                     double[::1] len1, double[::1] len2,
                     long[::1] oi, long[::1] oj, double[::1] og,
                     Py_ssize_t l, Py_ssize_t w,
                     double b1sq, double b2sq, double cross,
                     double v1, double v2, double jitter) noexcept nogil:
    cdef Py_ssize_t i, k, r, c
    for k in range(w + 1):
        for i in range(l):
            ab[k, i] = 0.0
    for i in range(len1.shape[0]):
        ab[0, pos1[i]] = b1sq * len1[i] + 2.0 * v1 + jitter
    for i in range(len2.shape[0]):
        ab[0, pos2[i]] = b2sq * len2[i] + 2.0 * v2 + jitter
    for i in range(len1.shape[0] - 1):
        ab[pos1[i + 1] - pos1[i], pos1[i]] = -v1
    for i in range(len2.shape[0] - 1):
        ab[pos2[i + 1] - pos2[i], pos2[i]] = -v2
    for i in range(og.shape[0]):
        r = pos1[oi[i]]
        c = pos2[oj[i]]
        if r >= c:
            ab[r - c, c] = cross * og[i]
        else:
            ab[c - r, r] = cross * og[i]


def quad_logdet(pos1, pos2, len1, len2, oi, oj, og, w, zb,
                double b1sq, double b2sq, double cross,
                double v1, double v2, double jitter=0.0):
    """Quadratic form z'S^{-1}z and log det S for one block."""
    cdef long[::1] p1 = np.ascontiguousarray(pos1, dtype=np.int64)
    cdef long[::1] p2 = np.ascontiguousarray(pos2, dtype=np.int64)
    cdef double[::1] l1 = np.ascontiguousarray(len1, dtype=np.float64)
    cdef double[::1] l2 = np.ascontiguousarray(len2, dtype=np.float64)
    cdef long[::1] i1 = np.ascontiguousarray(oi, dtype=np.int64)
    cdef long[::1] i2 = np.ascontiguousarray(oj, dtype=np.int64)
    cdef double[::1] gg = np.ascontiguousarray(og, dtype=np.float64)
    cdef Py_ssize_t ww = w
    cdef Py_ssize_t l = l1.shape[0] + l2.shape[0]
    cdef double[:, ::1] ab = np.empty((ww + 1, l))
    cdef double[::1] y = np.array(zb, dtype=np.float64)
    cdef Py_ssize_t i
    cdef double quad = 0.0, logdet = 0.0

    _fill_band(ab, p1, p2, l1, l2, i1, i2, gg, l, ww, b1sq, b2sq, cross, v1, v2, jitter)
    if _band_cholesky(ab, l, ww):
        return np.nan, np.nan, 1
    _forward_solve(ab, y, l, ww)
    for i in range(l):
        quad += y[i] * y[i]
        logdet += log(ab[0, i])
    return quad, 2.0 * logdet, 0


def grad_terms(pos1, pos2, len1, len2, oi, oj, og, w, zb,
               double b1sq, double b2sq, double cross,
               double v1, double v2, double jitter=0.0):
    """Quadratic form, log det and the six gradient contractions."""
    cdef long[::1] p1 = np.ascontiguousarray(pos1, dtype=np.int64)
    cdef long[::1] p2 = np.ascontiguousarray(pos2, dtype=np.int64)
    cdef double[::1] l1 = np.ascontiguousarray(len1, dtype=np.float64)
    cdef double[::1] l2 = np.ascontiguousarray(len2, dtype=np.float64)
    cdef long[::1] i1 = np.ascontiguousarray(oi, dtype=np.int64)
    cdef long[::1] i2 = np.ascontiguousarray(oj, dtype=np.int64)
    cdef double[::1] gg = np.ascontiguousarray(og, dtype=np.float64)
    cdef double[::1] z = np.ascontiguousarray(zb, dtype=np.float64)
    cdef Py_ssize_t ww = w
    cdef Py_ssize_t l = l1.shape[0] + l2.shape[0]
    cdef double[:, ::1] ab = np.empty((ww + 1, l))
    cdef double[:, ::1] sb = np.empty((ww + 1, l))
    cdef double[::1] wv = np.empty(l)
    cdef Py_ssize_t i, r, c
    cdef double quad = 0.0, logdet = 0.0
    cdef double qb1 = 0.0, qb2 = 0.0, qc = 0.0, tb1 = 0.0, tb2 = 0.0, tc = 0.0

    _fill_band(ab, p1, p2, l1, l2, i1, i2, gg, l, ww, b1sq, b2sq, cross, v1, v2, jitter)
    if _band_cholesky(ab, l, ww):
        return (np.nan,) * 8 + (1,)
    for i in range(l):
        wv[i] = z[i]
        logdet += log(ab[0, i])
    _forward_solve(ab, wv, l, ww)
    _backward_solve(ab, wv, l, ww)
    for i in range(l):
        quad += z[i] * wv[i]
    _takahashi_band(ab, sb, l, ww)
    for i in range(l1.shape[0]):
        qb1 += l1[i] * wv[p1[i]] * wv[p1[i]]
        tb1 += l1[i] * sb[0, p1[i]]
    for i in range(l2.shape[0]):
        qb2 += l2[i] * wv[p2[i]] * wv[p2[i]]
        tb2 += l2[i] * sb[0, p2[i]]
    for i in range(gg.shape[0]):
        r = p1[i1[i]]
        c = p2[i2[i]]
        qc += gg[i] * wv[r] * wv[c]
        if r >= c:
            tc += gg[i] * sb[r - c, c]
        else:
            tc += gg[i] * sb[c - r, r]
    return quad, 2.0 * logdet, qb1, qb2, qc, tb1, tb2, tc, 0


def batch_quad_logdet(pos1, pos2, len1, len2, oi, oj, og, w, zb,
                      b1sq, b2sq, cross, double v1, double v2, double jitter=0.0):
    """Vector of (quad, logdet) over arrays of diffusion coefficients."""
    cdef long[::1] p1 = np.ascontiguousarray(pos1, dtype=np.int64)
    cdef long[::1] p2 = np.ascontiguousarray(pos2, dtype=np.int64)
    cdef double[::1] l1 = np.ascontiguousarray(len1, dtype=np.float64)
    cdef double[::1] l2 = np.ascontiguousarray(len2, dtype=np.float64)
    cdef long[::1] i1 = np.ascontiguousarray(oi, dtype=np.int64)
    cdef long[::1] i2 = np.ascontiguousarray(oj, dtype=np.int64)
    cdef double[::1] gg = np.ascontiguousarray(og, dtype=np.float64)
    cdef double[::1] z = np.ascontiguousarray(zb, dtype=np.float64)
    cdef double[::1] a1 = np.ascontiguousarray(b1sq, dtype=np.float64)
    cdef double[::1] a2 = np.ascontiguousarray(b2sq, dtype=np.float64)
    cdef double[::1] ac = np.ascontiguousarray(cross, dtype=np.float64)
    cdef Py_ssize_t ww = w
    cdef Py_ssize_t l = l1.shape[0] + l2.shape[0]
    cdef Py_ssize_t npts = a1.shape[0]
    cdef double[:, ::1] ab = np.empty((ww + 1, l))
    cdef double[::1] y = np.empty(l)
    cdef cnp.ndarray quads = np.empty(npts)
    cdef cnp.ndarray logdets = np.empty(npts)
    cdef cnp.ndarray statuses = np.zeros(npts, dtype=np.int64)
    cdef double[::1] qv = quads
    cdef double[::1] dv = logdets
    cdef long[::1] sv = statuses
    cdef Py_ssize_t k, i
    cdef double quad, logdet

    with nogil:
        for k in range(npts):
            _fill_band(ab, p1, p2, l1, l2, i1, i2, gg, l, ww,
                       a1[k], a2[k], ac[k], v1, v2, jitter)
            if _band_cholesky(ab, l, ww):
                qv[k] = NAN
                dv[k] = NAN
                sv[k] = 1
                continue
            for i in range(l):
                y[i] = z[i]
            _forward_solve(ab, y, l, ww)
            quad = 0.0
            logdet = 0.0
            for i in range(l):
                quad += y[i] * y[i]
                logdet += log(ab[0, i])
            qv[k] = quad
            dv[k] = 2.0 * logdet
            sv[k] = 0
    return quads, logdets, statuses


def interval_overlaps(lo1, hi1, lo2, hi2):
    """Sparse intersection lengths of two sorted disjoint interval lists."""
    cdef double[::1] a_lo = np.ascontiguousarray(lo1, dtype=np.float64)
    cdef double[::1] a_hi = np.ascontiguousarray(hi1, dtype=np.float64)
    cdef double[::1] b_lo = np.ascontiguousarray(lo2, dtype=np.float64)
    cdef double[::1] b_hi = np.ascontiguousarray(hi2, dtype=np.float64)
    cdef Py_ssize_t n1 = a_lo.shape[0], n2 = b_lo.shape[0]
    cdef cnp.ndarray oi = np.empty(n1 + n2, dtype=np.int64)
    cdef cnp.ndarray oj = np.empty(n1 + n2, dtype=np.int64)
    cdef cnp.ndarray og = np.empty(n1 + n2, dtype=np.float64)
    cdef long[::1] vi = oi
    cdef long[::1] vj = oj
    cdef double[::1] vg = og
    cdef Py_ssize_t i = 0, j = 0, k = 0
    cdef double lo, hi
    while i < n1 and j < n2:
        lo = a_lo[i] if a_lo[i] > b_lo[j] else b_lo[j]
        hi = a_hi[i] if a_hi[i] < b_hi[j] else b_hi[j]
        if hi > lo:
            vi[k] = i
            vj[k] = j
            vg[k] = hi - lo
            k += 1
        if a_hi[i] <= b_hi[j]:
            i += 1
        else:
            j += 1
    return oi[:k].copy(), oj[:k].copy(), og[:k].copy()


def cir_euler(double y01, double y02, double alpha1, double alpha2,
              double beta1, double beta2, double s1, double s2, double s3,
              double dt, dw):
    """Euler scheme for the two-dimensional square-root process."""
    cdef double[:, ::1] w = np.ascontiguousarray(dw, dtype=np.float64)
    cdef Py_ssize_t n = w.shape[1]
    cdef cnp.ndarray out = np.empty((2, n + 1))
    cdef double[:, ::1] path = out
    cdef double y1 = y01, y2 = y02, sq1, sq2
    cdef Py_ssize_t t
    path[0, 0] = y1
    path[1, 0] = y2
    with nogil:
        for t in range(n):
            sq1 = sqrt(y1)
            sq2 = sqrt(y2)
            y1 = fabs(y1 + (alpha1 - beta1 * y1) * dt + s1 * sq1 * w[0, t])
            y2 = fabs(y2 + (alpha2 - beta2 * y2) * dt + s3 * sq2 * w[0, t] + s2 * sq2 * w[1, t])
            path[0, t + 1] = y1
            path[1, t + 1] = y2
    return out
