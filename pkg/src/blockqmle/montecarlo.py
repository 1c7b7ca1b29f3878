"""Monte Carlo harness: replicated simulate-estimate pipelines.

Each replication draws its own seed stream from (master_seed, index), so
results are independent of worker count and identical across runs;
aggregation always happens in replication order.  A failing replication
is recorded and skipped, never aborts the run.
"""

from __future__ import annotations

import concurrent.futures
import csv
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .baseline import realized_cov_previous_tick
from .blocks import BlockConfig, build_blocks
from .errors import ConfigError, EstimationError
from .estimate import estimate_pipeline, mle
from .limits import LimitContext, theoretical_min_std
from .models import DiffusionModel, make_model
from .simulate import (
    NoiseConfig,
    PathConfig,
    SamplingConfig,
    simulate_observations,
    true_quadratic_covariation,
)


@dataclass
class RunConfig:
    """One experiment: generator settings, estimator toggles, replication plan."""

    model: str = "constant"
    path: PathConfig = field(default_factory=PathConfig)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    blocks: Optional[BlockConfig] = None  # None means the automatic rule
    box_lower: Optional[tuple] = None
    box_upper: Optional[tuple] = None
    bayes: bool = False
    baseline: bool = True
    oracle: bool = False
    replications: int = 1
    master_seed: int = 1
    workers: int = 1

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def make_model(self) -> DiffusionModel:
        model = make_model(self.model, lower=self.box_lower, upper=self.box_upper)
        sigma = np.asarray(self.path.sigma)
        if np.any(sigma < model.lower) or np.any(sigma > model.upper):
            import warnings

            warnings.warn("true parameter lies outside the search box", stacklevel=2)
        return model

    def block_config(self) -> BlockConfig:
        if self.blocks is not None:
            return self.blocks
        return BlockConfig(b_n=self.sampling.n)

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        raw = dict(raw)
        model = raw.pop("model", "constant")
        path_kw = dict(raw.pop("path", {}))
        path_kw.setdefault("model", model)
        for key in ("sigma", "alpha", "beta", "y0"):
            if key in path_kw:
                path_kw[key] = tuple(path_kw[key])
        path = PathConfig(**path_kw)
        sampling = SamplingConfig(**raw.pop("sampling", {}))
        noise_kw = dict(raw.pop("noise", {}))
        for key in ("v", "shape", "scale"):
            if key in noise_kw:
                noise_kw[key] = tuple(noise_kw[key])
        noise = NoiseConfig(**noise_kw)
        blocks_raw = raw.pop("blocks", "auto")
        blocks = None if blocks_raw in ("auto", None) else BlockConfig(**blocks_raw)
        box = raw.pop("box", None)
        lower = upper = None
        if box is not None:
            lower, upper = tuple(box["lower"]), tuple(box["upper"])
        return cls(model=model, path=path, sampling=sampling, noise=noise,
                   blocks=blocks, box_lower=lower, box_upper=upper, **raw)

    @classmethod
    def from_json(cls, path: str) -> "RunConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        out = {
            "model": self.model,
            "path": {
                "sigma": list(self.path.sigma), "T": self.path.T,
                "fine_grid_points": self.path.fine_grid_points,
            },
            "sampling": {"n": self.sampling.n, "lambda1": self.sampling.lambda1,
                         "lambda2": self.sampling.lambda2},
            "noise": {"kind": self.noise.kind},
            "blocks": "auto" if self.blocks is None else
                      {"b_n": self.blocks.b_n, "k_n": self.blocks.k_n},
            "bayes": self.bayes, "baseline": self.baseline, "oracle": self.oracle,
            "replications": self.replications, "master_seed": self.master_seed,
            "workers": self.workers,
        }
        if self.model == "cir":
            out["path"].update(alpha=list(self.path.alpha), beta=list(self.path.beta),
                               y0=list(self.path.y0))
        if self.noise.kind == "gaussian":
            out["noise"]["v"] = list(self.noise.v)
        else:
            out["noise"].update(shape=list(self.noise.shape), scale=list(self.noise.scale))
        if self.box_lower is not None:
            out["box"] = {"lower": list(self.box_lower), "upper": list(self.box_upper)}
        return out


def run_replication(cfg: RunConfig, rep_index: int) -> dict:
    """One simulate-estimate replication; raises on unrecoverable failure."""
    seed = np.random.SeedSequence((cfg.master_seed, rep_index))
    obs, path = simulate_observations(cfg.path, cfg.sampling, cfg.noise, seed)
    model = cfg.make_model()
    block_cfg = cfg.block_config()
    report = estimate_pipeline(obs, model, block_cfg=block_cfg, with_bayes=cfg.bayes)
    result = {
        "rep": rep_index,
        "sigma_raw": report.sigma_first.tolist(),
        "v_hat": report.v_hat.tolist(),
        "sigma_plug": report.sigma_hat.tolist(),
        "v_plug": report.v_plugin.tolist(),
        "qcov": report.qcov,
        "qcov_true": true_quadratic_covariation(path),
        "stderr": None if report.stderr is None else report.stderr.tolist(),
    }
    if report.sigma_bayes is not None:
        result["sigma_bayes"] = report.sigma_bayes.tolist()
    if cfg.baseline:
        result["qcov_rc"] = realized_cov_previous_tick(obs)
    if cfg.oracle:
        bd = build_blocks(obs, block_cfg)
        v_star = np.asarray(cfg.noise.variances)
        result["sigma_oracle"] = mle(bd, model, v_star).tolist()
    return result


def _safe_replication(args):
    cfg, rep_index = args
    try:
        return run_replication(cfg, rep_index)
    except Exception as exc:  # failure isolation: record, do not abort
        return {"rep": rep_index, "error": f"{type(exc).__name__}: {exc}"}


@dataclass
class MonteCarloTable:
    """Aggregated per-estimator statistics plus failure bookkeeping."""

    rows: list  # (estimator, coord, mean, sd)
    n: int
    completed: int
    failures: list

    def write_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["estimator", "coord", "mean", "sd", "n", "reps"])
            for est, coord, mean, sd in self.rows:
                writer.writerow([est, coord, repr(mean), repr(sd), self.n, self.completed])
            writer.writerow(["_meta", "failures", len(self.failures), "", self.n, self.completed])


_SIGMA_COORDS = ("sigma1", "sigma2", "sigma3")


def _stat_rows(est: str, coords, samples) -> list:
    arr = np.asarray(samples, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    mean = arr.mean(axis=0)
    sd = arr.std(axis=0, ddof=1) if len(arr) > 1 else np.zeros(arr.shape[1])
    return [(est, c, float(m), float(s)) for c, m, s in zip(coords, mean, sd)]


def run_montecarlo(cfg: RunConfig, log=None) -> MonteCarloTable:
    """Run all replications (optionally in parallel) and aggregate."""
    tasks = [(cfg, r) for r in range(cfg.replications)]
    if cfg.workers == 1:
        results = [_safe_replication(t) for t in tasks]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_safe_replication, tasks, chunksize=1))
    results.sort(key=lambda r: r["rep"])

    ok = [r for r in results if "error" not in r]
    failures = [(r["rep"], r["error"]) for r in results if "error" in r]
    if log is not None:
        for rep, err in failures:
            log(f"replication {rep} failed: {err}")
    if not ok:
        raise EstimationError("all replications failed", diagnostics={"failures": failures})

    rows = []
    rows += _stat_rows("raw", _SIGMA_COORDS, [r["sigma_raw"] for r in ok])
    rows += _stat_rows("raw", ("v1", "v2"), [r["v_hat"] for r in ok])
    rows += _stat_rows("plugin", _SIGMA_COORDS, [r["sigma_plug"] for r in ok])
    rows += _stat_rows("plugin", ("v1", "v2"), [r["v_plug"] for r in ok])
    if cfg.oracle:
        rows += _stat_rows("oracle", _SIGMA_COORDS, [r["sigma_oracle"] for r in ok])
    if cfg.bayes:
        rows += _stat_rows("bayes", _SIGMA_COORDS, [r["sigma_bayes"] for r in ok])
    rows += _stat_rows("qcov_mle", ("value",), [r["qcov"] for r in ok])
    rows += _stat_rows("qcov_mle", ("error",),
                       [r["qcov"] - r["qcov_true"] for r in ok])
    if cfg.baseline:
        rows += _stat_rows("qcov_rc", ("value",), [r["qcov_rc"] for r in ok])
        rows += _stat_rows("qcov_rc", ("error",),
                           [r["qcov_rc"] - r["qcov_true"] for r in ok])
    if cfg.model == "constant":
        ctx = LimitContext(
            model=cfg.make_model(), sigma_star=np.asarray(cfg.path.sigma),
            v_star=np.asarray(cfg.noise.variances),
            a=(cfg.sampling.lambda1, cfg.sampling.lambda2), T=cfg.path.T,
        )
        rows.append(("theory", "min_std",
                     theoretical_min_std(ctx, cfg.sampling.n), 0.0))
    return MonteCarloTable(rows=rows, n=cfg.sampling.n,
                           completed=len(ok), failures=failures)
