"""Benchmark of the compiled kernels against the pure-Python fallback.

Builds one simulated dataset, then times likelihood and gradient
evaluations through each available backend by temporarily swapping the
kernel functions used by the likelihood module.
"""

from __future__ import annotations

import time

import numpy as np

from . import _kernels, likelihood
from .blocks import BlockConfig, build_blocks
from .models import ConstantDiffusion
from .simulate import NoiseConfig, PathConfig, SamplingConfig, simulate_observations


def _time_call(fn, min_time=0.5):
    fn()  # warm up
    n = 0
    t0 = time.perf_counter()
    while True:
        fn()
        n += 1
        dt = time.perf_counter() - t0
        if dt > min_time:
            return dt / n


def run_benchmark(n: int = 5000, seed: int = 0) -> list:
    """Time per likelihood/gradient evaluation for each backend.

    Returns rows ``(backend, operation, seconds_per_call)``.
    """
    obs, _ = simulate_observations(
        PathConfig(), SamplingConfig(n=n), NoiseConfig(), seed=seed
    )
    bd = build_blocks(obs, BlockConfig(b_n=n))
    model = ConstantDiffusion()
    sigma = np.array([1.0, 0.85, 0.5])
    v = np.array([0.001, 0.001])
    sigmas = np.tile(sigma, (64, 1))

    backends = ["pure"]
    try:
        _kernels.get_backend("core")
        backends.insert(0, "core")
    except ImportError:
        pass

    rows = []
    saved = likelihood._kernels
    try:
        for name in backends:
            likelihood._kernels = _kernels.get_backend(name)
            rows.append((name, "loglik",
                         _time_call(lambda: likelihood.loglik(bd, model, sigma, v))))
            rows.append((name, "loglik_grad",
                         _time_call(lambda: likelihood.loglik_grad(bd, model, sigma, v))))
            per_batch = _time_call(
                lambda: likelihood.loglik_batch(bd, model, sigmas, v))
            rows.append((name, "loglik_batch64", per_batch / len(sigmas)))
    finally:
        likelihood._kernels = saved
    return rows


def format_benchmark(rows: list) -> str:
    by_op = {}
    for backend, op, sec in rows:
        by_op.setdefault(op, {})[backend] = sec
    lines = [f"{'operation':<16}{'backend':<8}{'per call':>12}{'speedup':>10}"]
    for op, res in by_op.items():
        base = res.get("pure")
        for backend, sec in res.items():
            speedup = "" if backend == "pure" or base is None else f"{base / sec:9.1f}x"
            lines.append(f"{op:<16}{backend:<8}{sec * 1e3:>10.3f}ms{speedup:>10}")
    return "\n".join(lines)
