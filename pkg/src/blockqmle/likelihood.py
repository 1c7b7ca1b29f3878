"""Block quasi-log-likelihood, its gradient and Hessian.

Every non-excluded block contributes a Gaussian-form term built from the
block covariance: component diagonals carry the squared diffusion scale
times the interval lengths plus the noise-difference matrix, and the
off-diagonal block carries the interval overlaps times the cross scale.
Terms are evaluated through the banded kernels; a dense reference builder
is kept for diagnostics and small problems.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .blocks import Block, BlockData
from .errors import DataError, NumericalError
from .models import DiffusionModel
from .tridiag import noise_diff_matrix

# noise variances are floored here before assembly so the noise part of the
# covariance never vanishes exactly
V_FLOOR = 1e-12

_JITTER_START = 1e-12
_JITTER_STOP = 1e-6


def _clamp_v(v) -> np.ndarray:
    return np.maximum(np.asarray(v, dtype=float), V_FLOOR)


def _mean_diag(block: Block, b1sq: float, b2sq: float, v1: float, v2: float) -> float:
    tr = (
        b1sq * float(np.sum(block.lens[0])) + 2.0 * v1 * block.counts[0]
        + b2sq * float(np.sum(block.lens[1])) + 2.0 * v2 * block.counts[1]
    )
    return tr / block.size


def _eval_block(kern_fn, block: Block, b1sq: float, b2sq: float, cross: float,
                v1: float, v2: float, diag: dict):
    """Run a block kernel under the escalating-jitter policy."""
    out = kern_fn(
        block.pos1, block.pos2, block.lens[0], block.lens[1],
        block.oi, block.oj, block.og, block.bandwidth, block.zb,
        b1sq, b2sq, cross, v1, v2, 0.0,
    )
    if out[-1] == 0:
        return out
    scale = _mean_diag(block, b1sq, b2sq, v1, v2)
    jitter = _JITTER_START * scale
    while jitter <= _JITTER_STOP * scale:
        diag["jitter_events"] = diag.get("jitter_events", 0) + 1
        out = kern_fn(
            block.pos1, block.pos2, block.lens[0], block.lens[1],
            block.oi, block.oj, block.og, block.bandwidth, block.zb,
            b1sq, b2sq, cross, v1, v2, jitter,
        )
        if out[-1] == 0:
            return out
        jitter *= 10.0
    raise NumericalError(
        f"block {block.index}: covariance not positive definite after jitter escalation"
    )


def loglik(bd: BlockData, model: DiffusionModel, sigma, v, diag: dict = None) -> float:
    """Quasi-log-likelihood over all included blocks."""
    sigma = np.asarray(sigma, dtype=float)
    v1, v2 = _clamp_v(v)
    diag = diag if diag is not None else {}
    included = bd.included()
    if not included:
        raise DataError("no usable blocks: every block is degenerate or excluded")
    total = 0.0
    for blk in included:
        b1sq, b2sq, cross = model.scalars(blk.s_lo, blk.x_hat, sigma)
        quad, logdet, _ = _eval_block(
            _kernels.quad_logdet, blk, b1sq, b2sq, cross, v1, v2, diag
        )
        total += quad + logdet
    return -0.5 * total


def loglik_grad(bd: BlockData, model: DiffusionModel, sigma, v, diag: dict = None) -> np.ndarray:
    """Analytic sigma-gradient of :func:`loglik`.

    Uses the identity that the derivative of each block term against any
    coefficient needs only the contractions of the weighted residual and
    of the inverse covariance over the sparsity pattern of dS.
    """
    sigma = np.asarray(sigma, dtype=float)
    if not model.has_gradient:
        return _fd_grad(bd, model, sigma, v, diag)
    v1, v2 = _clamp_v(v)
    diag = diag if diag is not None else {}
    included = bd.included()
    if not included:
        raise DataError("no usable blocks: every block is degenerate or excluded")
    grad = np.zeros(model.d)
    for blk in included:
        b1sq, b2sq, cross = model.scalars(blk.s_lo, blk.x_hat, sigma)
        g1, g2, gc = model.scalars_grad(blk.s_lo, blk.x_hat, sigma)
        _, _, qb1, qb2, qc, tb1, tb2, tc, _ = _eval_block(
            _kernels.grad_terms, blk, b1sq, b2sq, cross, v1, v2, diag
        )
        grad += 0.5 * (
            g1 * (qb1 - tb1) + g2 * (qb2 - tb2) + 2.0 * gc * (qc - tc)
        )
    return grad


def _fd_grad(bd, model, sigma, v, diag, rel_step=1e-6):
    grad = np.empty(model.d)
    for j in range(model.d):
        h = rel_step * (1.0 + abs(sigma[j]))
        up = sigma.copy()
        dn = sigma.copy()
        up[j] += h
        dn[j] -= h
        grad[j] = (loglik(bd, model, up, v, diag) - loglik(bd, model, dn, v, diag)) / (2 * h)
    return grad


def loglik_hess(bd: BlockData, model: DiffusionModel, sigma, v, diag: dict = None) -> np.ndarray:
    """Hessian by central differences of the analytic gradient."""
    sigma = np.asarray(sigma, dtype=float)
    hess = np.empty((model.d, model.d))
    for j in range(model.d):
        h = 1e-4 * (1.0 + abs(sigma[j]))
        up = sigma.copy()
        dn = sigma.copy()
        up[j] += h
        dn[j] -= h
        hess[:, j] = (
            loglik_grad(bd, model, up, v, diag) - loglik_grad(bd, model, dn, v, diag)
        ) / (2 * h)
    return 0.5 * (hess + hess.T)


def loglik_batch(bd: BlockData, model: DiffusionModel, sigmas: np.ndarray, v,
                 diag: dict = None) -> np.ndarray:
    """Quasi-log-likelihood over an (npts, d) array of parameter points."""
    sigmas = np.asarray(sigmas, dtype=float)
    v1, v2 = _clamp_v(v)
    diag = diag if diag is not None else {}
    included = bd.included()
    if not included:
        raise DataError("no usable blocks: every block is degenerate or excluded")
    total = np.zeros(len(sigmas))
    for blk in included:
        b1s, b2s, cs = model.scalars_batch(blk.s_lo, blk.x_hat, sigmas)
        quads, logdets, statuses = _kernels.batch_quad_logdet(
            blk.pos1, blk.pos2, blk.lens[0], blk.lens[1],
            blk.oi, blk.oj, blk.og, blk.bandwidth, blk.zb,
            np.ascontiguousarray(b1s), np.ascontiguousarray(b2s),
            np.ascontiguousarray(cs), v1, v2, 0.0,
        )
        bad = np.nonzero(statuses)[0]
        for i in bad:
            quads[i], logdets[i], _ = _eval_block(
                _kernels.quad_logdet, blk, float(b1s[i]), float(b2s[i]),
                float(cs[i]), v1, v2, diag,
            )
        total += quads + logdets
    return -0.5 * total


@dataclass
class BlockCovariance:
    """Dense block covariance with its factor; reference implementation."""

    matrix: np.ndarray
    chol: np.ndarray
    logdet: float
    jitter: float = 0.0


def block_covariance(block: Block, model: DiffusionModel, sigma, v) -> BlockCovariance:
    """Assemble the dense covariance of one block and factor it.

    Slots are ordered component 1 then component 2 (the same order as the
    block increment vector).  The same escalating-jitter policy as the
    banded path applies.
    """
    sigma = np.asarray(sigma, dtype=float)
    v1, v2 = _clamp_v(v)
    b1sq, b2sq, cross = model.scalars(block.s_lo, block.x_hat, sigma)
    k1 = max(block.counts[0], 0)
    k2 = max(block.counts[1], 0)
    l = k1 + k2
    if l == 0:
        raise DataError(f"block {block.index}: empty")
    S = np.zeros((l, l))
    if k1:
        S[:k1, :k1] = np.diag(b1sq * block.lens[0]) + v1 * noise_diff_matrix(k1)
    if k2:
        S[k1:, k1:] = np.diag(b2sq * block.lens[1]) + v2 * noise_diff_matrix(k2)
    if len(block.oi):
        S[block.oi, k1 + block.oj] = cross * block.og
        S[k1 + block.oj, block.oi] = cross * block.og
    scale = np.trace(S) / l
    jitter = 0.0
    while True:
        try:
            chol = np.linalg.cholesky(S + jitter * np.eye(l))
            break
        except np.linalg.LinAlgError:
            jitter = _JITTER_START * scale if jitter == 0.0 else jitter * 10.0
            if jitter > _JITTER_STOP * scale:
                raise NumericalError(
                    f"block {block.index}: covariance not positive definite"
                ) from None
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    return BlockCovariance(matrix=S, chol=chol, logdet=logdet, jitter=jitter)
