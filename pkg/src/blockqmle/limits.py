"""Limit objects of the normalized quasi-likelihood ratio.

The rescaled likelihood ratio converges to an integral functional of the
diffusion scales, the noise-scaled sampling densities and the spectral
combination ``varphi``; its negative Hessian at the truth is the
information matrix governing the estimator's asymptotic variance, and a
separate closed form gives the noise-variance information.  These objects
yield the theoretical minimum standard deviation of any covariation
estimator at a given frequency.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate

from .errors import ConfigError, NumericalError
from .models import ConstantDiffusion, DiffusionModel
from .simulate import LatentPath


def varphi(x: float, y: float) -> float:
    """sqrt(x + sqrt(x^2-4y)) + sqrt(x - sqrt(x^2-4y)) for 0 <= 4y <= x^2.

    The inner discriminant is clamped to zero when it vanishes to rounding
    accuracy; arguments with 4y substantially above x^2 are rejected.
    """
    if x < 0:
        raise ConfigError(f"varphi needs x >= 0, got x={x}")
    disc = x * x - 4.0 * y
    if disc < 0:
        if 4.0 * y > x * x * (1.0 + 1e-12):
            raise ConfigError(f"varphi domain violated: x={x}, y={y}")
        disc = 0.0
    elif disc < 1e-14 * x * x:
        disc = 0.0
    r = np.sqrt(disc)
    return float(np.sqrt(x + r) + np.sqrt(max(x - r, 0.0)))


def _varphi_vec(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Vectorised varphi with the same domain checks and clamps."""
    if np.any(4.0 * y > x * x * (1.0 + 1e-12)):
        bad = int(np.argmax(4.0 * y - x * x))
        raise ConfigError(f"varphi domain violated at grid index {bad}")
    disc = np.clip(x * x - 4.0 * y, 0.0, None)
    r = np.sqrt(disc)
    return np.sqrt(x + r) + np.sqrt(np.clip(x - r, 0.0, None))


@dataclass
class LimitContext:
    """Everything the limit functionals integrate over.

    ``a`` holds the per-component sampling densities (constants for
    Poisson sampling).  State-dependent models require a latent path; the
    resulting objects are then conditional on that path.
    """

    model: DiffusionModel
    sigma_star: np.ndarray
    v_star: np.ndarray
    a: tuple = (1.0, 1.0)
    T: float = 1.0
    path: Optional[LatentPath] = None
    quadrature_points: int = 2048

    def __post_init__(self):
        self.sigma_star = np.asarray(self.sigma_star, dtype=float)
        self.v_star = np.asarray(self.v_star, dtype=float)
        if np.any(self.v_star <= 0):
            raise ConfigError("true noise variances must be positive")
        if self.a[0] <= 0 or self.a[1] <= 0:
            raise ConfigError("sampling densities must be positive")

    def grid(self) -> np.ndarray:
        # without a path the coefficients are time-invariant and a minimal
        # Simpson grid integrates the constant integrand exactly; with a
        # path the integral runs over the path's own grid, which is exact
        # for its piecewise-constant state representation
        if self.path is None:
            return np.linspace(0.0, self.T, 3)
        t = self.path.times
        return t[(t >= 0.0) & (t <= self.T)]

    def states(self, t: np.ndarray) -> np.ndarray:
        """Latent state at the quadrature times, shape (len(t), 2)."""
        if self.path is None:
            return np.zeros((len(t), 2))
        idx = np.searchsorted(self.path.times, t, side="right") - 1
        return self.path.values[:, idx].T


def _scaled_coeffs(ctx: LimitContext, t: np.ndarray, sigma) -> tuple:
    return ctx.model.scalars_along(t, ctx.states(t), sigma)


def qlr_limit(ctx: LimitContext, sigma) -> float:
    """Limit of the rescaled quasi-likelihood ratio at ``sigma``.

    Zero at the true parameter and strictly negative away from it under
    the identifiability conditions; used both as a convergence target and
    to compute the information matrix.
    """
    sigma = np.asarray(sigma, dtype=float)
    t = ctx.grid()
    a1, a2 = ctx.a[0] / ctx.v_star[0], ctx.a[1] / ctx.v_star[1]
    b1, b2, c = _scaled_coeffs(ctx, t, sigma)
    b1s, b2s, cs = _scaled_coeffs(ctx, t, ctx.sigma_star)
    det = b1 * b2 - c * c
    dets = b1s * b2s - cs * cs
    if np.any(det <= 0) or np.any(dets <= 0):
        raise NumericalError("diffusion covariance not positive definite on the grid")
    sq12 = np.sqrt(a1 * a2)
    phi = _varphi_vec(a1 * b1 + a2 * b2, a1 * a2 * det)
    phis = _varphi_vec(a1 * b1s + a2 * b2s, a1 * a2 * dets)
    num = (
        (b1 - b1s) * (b2 * sq12 + a1 * np.sqrt(det))
        + (b2 - b2s) * (b1 * sq12 + a2 * np.sqrt(det))
        - 2.0 * (c - cs) * c * sq12
    )
    integrand = num / (2.0 * np.sqrt(2.0) * np.sqrt(det) * phi) - (phi - phis) / (2.0 * np.sqrt(2.0))
    return float(integrate.simpson(integrand, x=t))


def noiseless_qlr_limit(ctx: LimitContext, sigma) -> float:
    """Limit of the likelihood ratio for equidistant noise-free sampling."""
    sigma = np.asarray(sigma, dtype=float)
    t = ctx.grid()
    b1, b2, c = _scaled_coeffs(ctx, t, sigma)
    b1s, b2s, cs = _scaled_coeffs(ctx, t, ctx.sigma_star)
    det = b1 * b2 - c * c
    dets = b1s * b2s - cs * cs
    if np.any(det <= 0) or np.any(dets <= 0):
        raise NumericalError("diffusion covariance not positive definite on the grid")
    tr = (b1s * b2 + b1 * b2s - 2.0 * c * cs) / det
    integrand = -0.5 * (tr - 2.0 + np.log(det / dets))
    return float(integrate.simpson(integrand, x=t))


def noise_qlr_limit(ctx: LimitContext, v) -> float:
    """Limit of the likelihood ratio in the noise-variance directions."""
    v = np.asarray(v, dtype=float)
    if np.any(v <= 0):
        raise ConfigError("noise variances must be positive")
    total = 0.0
    for j in range(2):
        ratio = ctx.v_star[j] / v[j]
        total += ctx.a[j] * ctx.T * (ratio - 1.0 + np.log(v[j] / ctx.v_star[j]))
    return -0.5 * total


def information_matrix(ctx: LimitContext) -> np.ndarray:
    """Negative Hessian of :func:`qlr_limit` at the truth, symmetrized.

    Central finite differences with per-coordinate steps; the result is
    conditional on the context path for state-dependent models.
    """
    s0 = ctx.sigma_star
    d = len(s0)
    h = 1e-4 * (1.0 + np.abs(s0))
    hess = np.empty((d, d))
    f0 = qlr_limit(ctx, s0)

    def f(delta):
        return qlr_limit(ctx, s0 + delta)

    for i in range(d):
        ei = np.zeros(d)
        ei[i] = h[i]
        hess[i, i] = (f(ei) - 2.0 * f0 + f(-ei)) / h[i] ** 2
        for j in range(i + 1, d):
            ej = np.zeros(d)
            ej[j] = h[j]
            hess[i, j] = hess[j, i] = (
                f(ei + ej) - f(ei - ej) - f(-ei + ej) + f(-ei - ej)
            ) / (4.0 * h[i] * h[j])
    if not np.all(np.isfinite(hess)):
        raise NumericalError("non-finite entries in the limit Hessian")
    return -0.5 * (hess + hess.T)


def noise_information_matrix(ctx: LimitContext) -> np.ndarray:
    """Closed-form information for the noise variances."""
    return np.diag([
        ctx.a[0] * ctx.T / (2.0 * ctx.v_star[0] ** 2),
        ctx.a[1] * ctx.T / (2.0 * ctx.v_star[1] ** 2),
    ])


def theoretical_min_std(ctx: LimitContext, n: int) -> float:
    """Minimum asymptotic standard deviation of covariation estimators.

    Delta-method bound for the product functional sigma1*sigma3*T of the
    constant-coefficient model at frequency index n.
    """
    if not isinstance(ctx.model, ConstantDiffusion):
        raise ConfigError("theoretical minimum is defined for the constant model")
    gamma = information_matrix(ctx)
    try:
        ginv = np.linalg.inv(gamma)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("information matrix is singular") from exc
    s1, _, s3 = ctx.sigma_star
    quad = s3 * s3 * ginv[0, 0] + 2.0 * s1 * s3 * ginv[0, 2] + s1 * s1 * ginv[2, 2]
    if quad <= 0:
        raise NumericalError("information matrix is not positive definite")
    return float(n ** -0.25 * ctx.T * np.sqrt(quad))
