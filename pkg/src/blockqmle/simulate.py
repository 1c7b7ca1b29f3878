"""Latent path simulation, Poisson sampling times and noisy observation.

The data generator produces a two-dimensional latent diffusion on a fine
grid, samples each component at its own Poisson arrival times, and adds
i.i.d. measurement noise.  All operations are pure functions of their
configuration and seed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .errors import ConfigError, DataError

MODEL_CONSTANT = "constant"
MODEL_CIR = "cir"


@dataclass(frozen=True)
class PathConfig:
    """Latent-path generator settings.

    ``sigma = (s1, s2, s3)`` parameterises the diffusion matrix
    [[s1, 0], [s3, s2]] (scaled by the square root of the state for the
    ``cir`` model).  ``alpha``, ``beta`` and ``y0`` are only used by the
    square-root model.
    """

    sigma: tuple = (1.0, np.sqrt(0.75), 0.5)
    T: float = 1.0
    fine_grid_points: int = 100_000
    model: str = MODEL_CONSTANT
    alpha: tuple = (1.0, 1.0)
    beta: tuple = (1.0, 1.0)
    y0: tuple = (1.0, 1.0)

    def __post_init__(self):
        s1, s2, s3 = self.sigma
        if self.model not in (MODEL_CONSTANT, MODEL_CIR):
            raise ConfigError(f"unknown path model {self.model!r}")
        if self.fine_grid_points < 2:
            raise ConfigError("fine_grid_points must be >= 2")
        if self.T <= 0:
            raise ConfigError("horizon T must be positive")
        if s1 <= 0 or s3 <= 0:
            raise ConfigError("sigma1 and sigma3 must be positive")
        if self.model == MODEL_CIR:
            if self.y0[0] <= 0 or self.y0[1] <= 0:
                raise ConfigError("initial state must be positive")
            if not (2 * self.alpha[0] > s1**2 and 2 * self.alpha[1] > s2**2 + s3**2):
                raise ConfigError(
                    "positivity conditions 2*alpha1 > sigma1^2 and "
                    "2*alpha2 > sigma2^2 + sigma3^2 violated"
                )


@dataclass(frozen=True)
class SamplingConfig:
    """Poisson sampling scheme: frequency index n and per-component rates."""

    n: int = 1000
    lambda1: float = 1.0
    lambda2: float = 1.0

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("frequency index n must be >= 1")
        if self.lambda1 <= 0 or self.lambda2 <= 0:
            raise ConfigError("Poisson intensities must be positive")


@dataclass(frozen=True)
class NoiseConfig:
    """Measurement-noise law: Gaussian variances or centered Gamma."""

    kind: str = "gaussian"
    v: tuple = (0.001, 0.001)
    shape: tuple = (2.0, 2.0)
    scale: tuple = (np.sqrt(0.0005), np.sqrt(0.0005))

    def __post_init__(self):
        if self.kind not in ("gaussian", "gamma"):
            raise ConfigError(f"unknown noise kind {self.kind!r}")
        if self.kind == "gaussian" and (self.v[0] < 0 or self.v[1] < 0):
            raise ConfigError("noise variances must be >= 0")
        if self.kind == "gamma" and (
            min(self.shape) <= 0 or min(self.scale) <= 0
        ):
            raise ConfigError("gamma shape and scale must be positive")

    @property
    def variances(self) -> tuple:
        """Implied per-component noise variances."""
        if self.kind == "gaussian":
            return self.v
        return (
            self.shape[0] * self.scale[0] ** 2,
            self.shape[1] * self.scale[1] ** 2,
        )


@dataclass(frozen=True)
class LatentPath:
    """Fine-grid latent path with its generating configuration."""

    times: np.ndarray
    values: np.ndarray  # shape (2, len(times))
    config: PathConfig


@dataclass
class ObservationSet:
    """Noisy nonsynchronous observations of both components.

    ``times[k]`` and ``values[k]`` (k = 0, 1) hold the observation times
    and noisy marks of component k+1.  A separate covariate stream may be
    attached; by default the covariate process is the observed process
    itself.
    """

    times: tuple
    values: tuple
    T: float
    n: Optional[int] = None
    x_times: Optional[tuple] = None
    x_values: Optional[tuple] = None

    def __post_init__(self):
        for k in range(2):
            t = np.asarray(self.times[k], dtype=float)
            v = np.asarray(self.values[k], dtype=float)
            if len(t) != len(v):
                raise DataError(f"component {k + 1}: times/values length mismatch")
            if len(t) and (t[0] < 0 or t[-1] > self.T):
                raise DataError(f"component {k + 1}: times outside [0, T]")
            if np.any(np.diff(t) <= 0):
                raise DataError(f"component {k + 1}: times not strictly increasing")

    @property
    def covariate_times(self) -> tuple:
        return self.x_times if self.x_times is not None else self.times

    @property
    def covariate_values(self) -> tuple:
        return self.x_values if self.x_values is not None else self.values

    def increment_counts(self) -> tuple:
        """Number of observed increments per component."""
        return (len(self.times[0]) - 1, len(self.times[1]) - 1)


def simulate_latent_path(cfg: PathConfig, seed) -> LatentPath:
    """Generate the latent path on the fine grid, deterministically in seed.

    The constant-coefficient model uses exact Gaussian increments; the
    square-root model uses an Euler scheme with reflection of negative
    values.
    """
    rng = np.random.default_rng(seed)
    npts = cfg.fine_grid_points
    dt = cfg.T / npts
    grid = np.linspace(0.0, cfg.T, npts + 1)
    s1, s2, s3 = cfg.sigma
    dw = rng.standard_normal((2, npts)) * np.sqrt(dt)
    if cfg.model == MODEL_CONSTANT:
        vals = np.empty((2, npts + 1))
        vals[:, 0] = 0.0
        np.cumsum(s1 * dw[0], out=vals[0, 1:])
        np.cumsum(s3 * dw[0] + s2 * dw[1], out=vals[1, 1:])
    else:
        vals = _kernels.cir_euler(
            cfg.y0[0], cfg.y0[1], cfg.alpha[0], cfg.alpha[1],
            cfg.beta[0], cfg.beta[1], s1, s2, s3, dt, dw,
        )
    return LatentPath(times=grid, values=vals, config=cfg)


def sample_poisson_times(lam: float, n: int, T: float, seed) -> np.ndarray:
    """Poisson observation times on [0, T] at rate lam * n.

    Time 0 is always observed; arrivals beyond the horizon collapse to a
    single final observation at T.
    """
    if lam <= 0 or n < 1:
        raise ConfigError("need lam > 0 and n >= 1")
    rng = np.random.default_rng(seed)
    rate = lam * n
    expected = rate * T
    chunk = int(expected + 6.0 * np.sqrt(expected) + 20)
    gaps = rng.exponential(1.0 / rate, size=chunk)
    arrivals = np.cumsum(gaps)
    while arrivals[-1] < T:
        gaps = rng.exponential(1.0 / rate, size=chunk)
        arrivals = np.concatenate([arrivals, arrivals[-1] + np.cumsum(gaps)])
    arrivals = arrivals[arrivals < T]
    return np.concatenate([[0.0], arrivals, [T]])


def _path_values_at(path: LatentPath, t: np.ndarray, component: int) -> np.ndarray:
    # left-nearest grid lookup
    idx = np.searchsorted(path.times, t, side="right") - 1
    return path.values[component, idx]


def _noise_draws(noise: NoiseConfig, rng, size: int, component: int) -> np.ndarray:
    if noise.kind == "gaussian":
        return rng.normal(0.0, np.sqrt(noise.v[component]), size=size)
    k = noise.shape[component]
    th = noise.scale[component]
    return rng.gamma(k, th, size=size) - k * th


def observe(path: LatentPath, times: Sequence[np.ndarray], noise: NoiseConfig, seed) -> ObservationSet:
    """Sample the path at given per-component times and add noise."""
    rng = np.random.default_rng(seed)
    T = path.config.T
    vals = []
    for k in range(2):
        t = np.asarray(times[k], dtype=float)
        if len(t) and (t.min() < 0 or t.max() > T):
            raise DataError("sampling times outside [0, T]")
        y = _path_values_at(path, t, k)
        vals.append(y + _noise_draws(noise, rng, len(t), k))
    return ObservationSet(
        times=(np.asarray(times[0], dtype=float), np.asarray(times[1], dtype=float)),
        values=(vals[0], vals[1]),
        T=T,
        n=None,
    )


def true_quadratic_covariation(path: LatentPath) -> float:
    """Quadratic covariation of the two components over the horizon.

    Analytic for the constant model; a fine-grid Riemann sum of the
    instantaneous covariance for the square-root model.
    """
    s1, s2, s3 = path.config.sigma
    if path.config.model == MODEL_CONSTANT:
        return s1 * s3 * path.config.T
    dt = np.diff(path.times)
    y1 = np.clip(path.values[0, :-1], 0.0, None)
    y2 = np.clip(path.values[1, :-1], 0.0, None)
    return float(s1 * s3 * np.sum(np.sqrt(y1 * y2) * dt))


def simulate_observations(path_cfg: PathConfig, sampling: SamplingConfig,
                          noise: NoiseConfig, seed) -> tuple:
    """Full generator: path, Poisson times per component, noisy marks.

    Returns ``(obs, path)``; child seeds for the path, the two sampling
    streams and the noise are derived from ``seed`` so the whole draw is
    reproducible.
    """
    ss = np.random.SeedSequence(seed) if not isinstance(seed, np.random.SeedSequence) else seed
    s_path, s_t1, s_t2, s_noise = ss.spawn(4)
    path = simulate_latent_path(path_cfg, s_path)
    t1 = sample_poisson_times(sampling.lambda1, sampling.n, path_cfg.T, s_t1)
    t2 = sample_poisson_times(sampling.lambda2, sampling.n, path_cfg.T, s_t2)
    obs = observe(path, (t1, t2), noise, s_noise)
    obs.n = sampling.n
    return obs, path


def write_csv(obs: ObservationSet, path: str) -> None:
    """Write observations as ``component,index,time,value`` rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["component", "index", "time", "value"])
        for k in range(2):
            for i, (t, v) in enumerate(zip(obs.times[k], obs.values[k])):
                writer.writerow([k + 1, i, repr(float(t)), repr(float(v))])
        if obs.x_times is not None:
            for k in range(2):
                for i, (t, v) in enumerate(zip(obs.x_times[k], obs.x_values[k])):
                    writer.writerow([f"x{k + 1}", i, repr(float(t)), repr(float(v))])


def read_csv(path: str, T: Optional[float] = None, n: Optional[int] = None) -> ObservationSet:
    """Read observations written by :func:`write_csv`.

    The horizon defaults to the largest time present.  Malformed rows
    raise :class:`DataError` with the offending line number.
    """
    streams = {"1": [], "2": [], "x1": [], "x2": []}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if lineno == 1:
                if row != ["component", "index", "time", "value"]:
                    raise DataError(f"line 1: unexpected header {row!r}")
                continue
            if not row:
                continue
            try:
                comp = row[0]
                t = float(row[2])
                v = float(row[3])
                streams[comp].append((t, v))
            except (IndexError, ValueError, KeyError) as exc:
                raise DataError(f"line {lineno}: malformed row {row!r}") from exc
    if not streams["1"] or not streams["2"]:
        raise DataError("both components must have observations")
    times, values = [], []
    for comp in ("1", "2"):
        arr = np.asarray(streams[comp], dtype=float)
        times.append(arr[:, 0])
        values.append(arr[:, 1])
    if T is None:
        T = max(times[0][-1], times[1][-1])
    x_times = x_values = None
    if streams["x1"] or streams["x2"]:
        if not (streams["x1"] and streams["x2"]):
            raise DataError("covariate stream must cover both components")
        xt, xv = [], []
        for comp in ("x1", "x2"):
            arr = np.asarray(streams[comp], dtype=float)
            xt.append(arr[:, 0])
            xv.append(arr[:, 1])
        x_times, x_values = tuple(xt), tuple(xv)
    return ObservationSet(
        times=tuple(times), values=tuple(values), T=T, n=n,
        x_times=x_times, x_values=x_values,
    )
