"""Diffusion coefficient models.

A model maps (t, x, sigma) to the 2 x d1 diffusion matrix rows of the two
observed components.  The block likelihood only consumes three scalars per
block: the squared row norms and the row dot product; models provide them
(and their sigma-gradients) directly so the built-in variants stay cheap
on the hot path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np

from .errors import ConfigError

DEFAULT_LOWER = (0.1, -3.0, 0.1)
DEFAULT_UPPER = (3.0, 3.0, 3.0)


@dataclass
class DiffusionModel:
    """Base class: generic reductions from the row map ``b``.

    Subclasses implement ``b(t, x, sigma) -> (2, d1) array`` and may
    provide ``db(t, x, sigma) -> (d, 2, d1)`` for analytic gradients.
    ``sign_invariant`` lists parameter indices that enter the likelihood
    only through their square; estimates are reported with those
    coordinates non-negative.
    """

    d: int
    lower: np.ndarray
    upper: np.ndarray
    d1: int = 2
    name: str = "custom"
    sign_invariant: tuple = ()

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.lower.shape != (self.d,) or self.upper.shape != (self.d,):
            raise ConfigError("box bounds must match the parameter dimension")
        if np.any(self.lower > self.upper):
            raise ConfigError("box lower bounds exceed upper bounds")

    def b(self, t: float, x: np.ndarray, sigma: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def db(self, t: float, x: np.ndarray, sigma: np.ndarray):
        return None

    @property
    def has_gradient(self) -> bool:
        return type(self).db is not DiffusionModel.db

    def scalars(self, t: float, x: np.ndarray, sigma: np.ndarray) -> tuple:
        """(|b1|^2, |b2|^2, b1.b2) at one point."""
        bm = self.b(t, x, sigma)
        return float(bm[0] @ bm[0]), float(bm[1] @ bm[1]), float(bm[0] @ bm[1])

    def scalars_grad(self, t: float, x: np.ndarray, sigma: np.ndarray) -> tuple:
        """Sigma-gradients of the three scalars, each of shape (d,)."""
        bm = self.b(t, x, sigma)
        dbm = self.db(t, x, sigma)
        if dbm is None:
            raise ConfigError(f"model {self.name!r} provides no analytic gradient")
        dbm = np.asarray(dbm)
        g1 = 2.0 * dbm[:, 0, :] @ bm[0]
        g2 = 2.0 * dbm[:, 1, :] @ bm[1]
        gc = dbm[:, 0, :] @ bm[1] + dbm[:, 1, :] @ bm[0]
        return g1, g2, gc

    def scalars_batch(self, t: float, x: np.ndarray, sigmas: np.ndarray) -> tuple:
        """Vectorised scalars over an (npts, d) array of parameters."""
        out = np.empty((3, len(sigmas)))
        for i, sg in enumerate(sigmas):
            out[0, i], out[1, i], out[2, i] = self.scalars(t, x, sg)
        return out[0], out[1], out[2]

    def scalars_along(self, t: np.ndarray, xs: np.ndarray, sigma: np.ndarray) -> tuple:
        """Scalars along a trajectory: (times, (len, 2) states, one parameter)."""
        out = np.empty((3, len(t)))
        for i in range(len(t)):
            out[0, i], out[1, i], out[2, i] = self.scalars(t[i], xs[i], sigma)
        return out[0], out[1], out[2]

    def canonicalize(self, sigma: np.ndarray) -> np.ndarray:
        """Representative of sigma modulo the declared sign symmetries."""
        out = np.array(sigma, dtype=float)
        for j in self.sign_invariant:
            out[j] = abs(out[j])
        return out


@dataclass
class ConstantDiffusion(DiffusionModel):
    """Constant coefficients: rows (s1, 0) and (s3, s2)."""

    d: int = 3
    lower: np.ndarray = field(default_factory=lambda: np.array(DEFAULT_LOWER))
    upper: np.ndarray = field(default_factory=lambda: np.array(DEFAULT_UPPER))
    name: str = "constant"
    sign_invariant: tuple = (1,)

    def b(self, t, x, sigma):
        s1, s2, s3 = sigma
        return np.array([[s1, 0.0], [s3, s2]])

    def db(self, t, x, sigma):
        return np.array([
            [[1.0, 0.0], [0.0, 0.0]],
            [[0.0, 0.0], [0.0, 1.0]],
            [[0.0, 0.0], [1.0, 0.0]],
        ])

    def scalars(self, t, x, sigma):
        s1, s2, s3 = sigma
        return s1 * s1, s2 * s2 + s3 * s3, s1 * s3

    def scalars_grad(self, t, x, sigma):
        s1, s2, s3 = sigma
        return (
            np.array([2.0 * s1, 0.0, 0.0]),
            np.array([0.0, 2.0 * s2, 2.0 * s3]),
            np.array([s3, 0.0, s1]),
        )

    def scalars_batch(self, t, x, sigmas):
        s1 = sigmas[:, 0]
        s2 = sigmas[:, 1]
        s3 = sigmas[:, 2]
        return s1 * s1, s2 * s2 + s3 * s3, s1 * s3

    def scalars_along(self, t, xs, sigma):
        s1, s2, s3 = sigma
        ones = np.ones(len(t))
        return s1 * s1 * ones, (s2 * s2 + s3 * s3) * ones, s1 * s3 * ones


@dataclass
class CIRDiffusion(DiffusionModel):
    """Square-root state scaling: rows (s1*sqrt(x1), 0), (s3, s2)*sqrt(x2)."""

    d: int = 3
    lower: np.ndarray = field(default_factory=lambda: np.array(DEFAULT_LOWER))
    upper: np.ndarray = field(default_factory=lambda: np.array(DEFAULT_UPPER))
    name: str = "cir"
    sign_invariant: tuple = (1,)

    def b(self, t, x, sigma):
        s1, s2, s3 = sigma
        r1 = np.sqrt(max(x[0], 0.0))
        r2 = np.sqrt(max(x[1], 0.0))
        return np.array([[s1 * r1, 0.0], [s3 * r2, s2 * r2]])

    def db(self, t, x, sigma):
        r1 = np.sqrt(max(x[0], 0.0))
        r2 = np.sqrt(max(x[1], 0.0))
        return np.array([
            [[r1, 0.0], [0.0, 0.0]],
            [[0.0, 0.0], [0.0, r2]],
            [[0.0, 0.0], [r2, 0.0]],
        ])

    def scalars(self, t, x, sigma):
        s1, s2, s3 = sigma
        x1 = max(x[0], 0.0)
        x2 = max(x[1], 0.0)
        return s1 * s1 * x1, (s2 * s2 + s3 * s3) * x2, s1 * s3 * np.sqrt(x1 * x2)

    def scalars_grad(self, t, x, sigma):
        s1, s2, s3 = sigma
        x1 = max(x[0], 0.0)
        x2 = max(x[1], 0.0)
        r12 = np.sqrt(x1 * x2)
        return (
            np.array([2.0 * s1 * x1, 0.0, 0.0]),
            np.array([0.0, 2.0 * s2 * x2, 2.0 * s3 * x2]),
            np.array([s3 * r12, 0.0, s1 * r12]),
        )

    def scalars_batch(self, t, x, sigmas):
        s1 = sigmas[:, 0]
        s2 = sigmas[:, 1]
        s3 = sigmas[:, 2]
        x1 = max(x[0], 0.0)
        x2 = max(x[1], 0.0)
        return s1 * s1 * x1, (s2 * s2 + s3 * s3) * x2, s1 * s3 * np.sqrt(x1 * x2)

    def scalars_along(self, t, xs, sigma):
        s1, s2, s3 = sigma
        x1 = np.clip(xs[:, 0], 0.0, None)
        x2 = np.clip(xs[:, 1], 0.0, None)
        return s1 * s1 * x1, (s2 * s2 + s3 * s3) * x2, s1 * s3 * np.sqrt(x1 * x2)


def make_model(name: str, lower=None, upper=None) -> DiffusionModel:
    """Factory for the built-in models by name."""
    kwargs = {}
    if lower is not None:
        kwargs["lower"] = np.asarray(lower, dtype=float)
    if upper is not None:
        kwargs["upper"] = np.asarray(upper, dtype=float)
    if name == "constant":
        return ConstantDiffusion(**kwargs)
    if name == "cir":
        return CIRDiffusion(**kwargs)
    raise ConfigError(f"unknown model {name!r}")
