"""Pure NumPy/SciPy implementation of the per-block numeric kernels.

Each observation block contributes a symmetric positive-definite covariance
matrix that is banded once the two components' increment slots are merged
in time order.  The kernels factor that band, accumulate the quadratic
form, log-determinant and the sparse gradient contractions, and never
materialise the dense matrix on the evaluation path.

This module is the fallback backend; the compiled extension in ``_core``
implements the identical interface.
"""

from __future__ import annotations

import numpy as np
from scipy import linalg

BACKEND = "pure"

_OK = 0
_NOT_PD = 1


def interval_overlaps(lo1, hi1, lo2, hi2):
    """Sparse intersection lengths of two sorted disjoint interval lists.

    Returns index arrays ``(oi, oj)`` and positive lengths ``og`` with
    ``og[k] = |[lo1[oi[k]], hi1[oi[k]]) ∩ [lo2[oj[k]], hi2[oj[k]])|``.
    """
    oi, oj, og = [], [], []
    i, j = 0, 0
    n1, n2 = len(lo1), len(lo2)
    while i < n1 and j < n2:
        lo = max(lo1[i], lo2[j])
        hi = min(hi1[i], hi2[j])
        if hi > lo:
            oi.append(i)
            oj.append(j)
            og.append(hi - lo)
        # advance whichever interval ends first
        if hi1[i] <= hi2[j]:
            i += 1
        else:
            j += 1
    return (
        np.asarray(oi, dtype=np.int64),
        np.asarray(oj, dtype=np.int64),
        np.asarray(og, dtype=np.float64),
    )


def _fill_band(pos1, pos2, len1, len2, oi, oj, og, w, b1sq, b2sq, cross, v1, v2, jitter):
    """Assemble the block covariance in LAPACK lower-banded storage."""
    l = len(pos1) + len(pos2)
    ab = np.zeros((w + 1, l))
    ab[0, pos1] = b1sq * len1 + 2.0 * v1
    ab[0, pos2] = b2sq * len2 + 2.0 * v2
    if len(pos1) > 1:
        ab[pos1[1:] - pos1[:-1], pos1[:-1]] = -v1
    if len(pos2) > 1:
        ab[pos2[1:] - pos2[:-1], pos2[:-1]] = -v2
    if len(oi):
        r = pos1[oi]
        c = pos2[oj]
        ab[np.abs(r - c), np.minimum(r, c)] = cross * og
    if jitter:
        ab[0, :] += jitter
    return ab


def _factor(ab):
    try:
        return linalg.cholesky_banded(ab, lower=True, check_finite=False), _OK
    except linalg.LinAlgError:
        return None, _NOT_PD


def quad_logdet(pos1, pos2, len1, len2, oi, oj, og, w, zb,
                b1sq, b2sq, cross, v1, v2, jitter=0.0):
    """Quadratic form z'S^{-1}z and log det S for one block.

    Returns ``(quad, logdet, status)`` with status 0 on success and 1 when
    the Cholesky factorisation fails (matrix not positive definite at the
    requested jitter level).
    """
    ab = _fill_band(pos1, pos2, len1, len2, oi, oj, og, w, b1sq, b2sq, cross, v1, v2, jitter)
    cb, status = _factor(ab)
    if status:
        return np.nan, np.nan, status
    # quad form needs only the forward substitution: z'S^{-1}z = |L^{-1}z|^2
    y = linalg.solve_banded((w, 0), cb, zb, check_finite=False)
    quad = float(y @ y)
    logdet = 2.0 * float(np.sum(np.log(cb[0])))
    return quad, logdet, _OK


def grad_terms(pos1, pos2, len1, len2, oi, oj, og, w, zb,
               b1sq, b2sq, cross, v1, v2, jitter=0.0):
    """Quadratic form, log det and the six gradient contractions.

    With W = S^{-1}z, the derivative of the block log-likelihood term in
    any coefficient direction only needs the contractions of W W' and of
    S^{-1} against the three sparsity groups of dS (component diagonals
    and the overlap block):

    returns ``(quad, logdet, qb1, qb2, qc, tb1, tb2, tc, status)`` where
    ``qb1 = sum(len1 * W[pos1]^2)``, ``tb1 = sum(len1 * diag(S^{-1})[pos1])``,
    ``qc = sum(og * W[pos1[oi]] * W[pos2[oj]])``,
    ``tc = sum(og * S^{-1}[pos1[oi], pos2[oj]])`` and so on.
    """
    ab = _fill_band(pos1, pos2, len1, len2, oi, oj, og, w, b1sq, b2sq, cross, v1, v2, jitter)
    cb, status = _factor(ab)
    if status:
        return (np.nan,) * 8 + (status,)
    l = ab.shape[1]
    W = linalg.cho_solve_banded((cb, True), zb, check_finite=False)
    sinv = linalg.cho_solve_banded((cb, True), np.eye(l), check_finite=False)
    quad = float(zb @ W)
    logdet = 2.0 * float(np.sum(np.log(cb[0])))
    d = np.diag(sinv)
    qb1 = float(len1 @ (W[pos1] ** 2))
    qb2 = float(len2 @ (W[pos2] ** 2))
    tb1 = float(len1 @ d[pos1])
    tb2 = float(len2 @ d[pos2])
    if len(oi):
        r = pos1[oi]
        c = pos2[oj]
        qc = float(og @ (W[r] * W[c]))
        tc = float(og @ sinv[r, c])
    else:
        qc = 0.0
        tc = 0.0
    return quad, logdet, qb1, qb2, qc, tb1, tb2, tc, _OK


def batch_quad_logdet(pos1, pos2, len1, len2, oi, oj, og, w, zb,
                      b1sq, b2sq, cross, v1, v2, jitter=0.0):
    """Vector of (quad, logdet) over arrays of diffusion coefficients."""
    npts = len(b1sq)
    quads = np.empty(npts)
    logdets = np.empty(npts)
    statuses = np.zeros(npts, dtype=np.int64)
    for k in range(npts):
        quads[k], logdets[k], statuses[k] = quad_logdet(
            pos1, pos2, len1, len2, oi, oj, og, w, zb,
            b1sq[k], b2sq[k], cross[k], v1, v2, jitter,
        )
    return quads, logdets, statuses


def cir_euler(y01, y02, alpha1, alpha2, beta1, beta2, s1, s2, s3, dt, dw):
    """Euler scheme for the two-dimensional square-root process.

    ``dw`` is a (2, n) array of Brownian increments; negative excursions
    are reflected to their absolute value after each step.
    """
    n = dw.shape[1]
    path = np.empty((2, n + 1))
    y1 = float(y01)
    y2 = float(y02)
    path[0, 0] = y1
    path[1, 0] = y2
    for t in range(n):
        sq1 = np.sqrt(y1)
        sq2 = np.sqrt(y2)
        y1 = abs(y1 + (alpha1 - beta1 * y1) * dt + s1 * sq1 * dw[0, t])
        y2 = abs(y2 + (alpha2 - beta2 * y2) * dt + s3 * sq2 * dw[0, t] + s2 * sq2 * dw[1, t])
        path[0, t + 1] = y1
        path[1, t + 1] = y2
    return path
