"""Command-line driver.

Subcommands: ``simulate`` (write an observation CSV), ``estimate`` (run the
estimation pipeline on a CSV), ``montecarlo`` (replicated simulate-estimate
study with CSV output), ``limits`` (limit objects for a configuration) and
``bench`` (kernel backend benchmark).  All commands take ``--config`` with
a JSON experiment description; command-line flags override config fields.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from .blocks import auto_block_config
from .estimate import estimate_pipeline
from .limits import (
    LimitContext,
    information_matrix,
    noise_information_matrix,
    theoretical_min_std,
)
from .montecarlo import RunConfig, run_montecarlo
from .simulate import read_csv, simulate_observations, true_quadratic_covariation, write_csv


def _load_config(args) -> RunConfig:
    cfg = RunConfig.from_json(args.config) if args.config else RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg.master_seed = args.seed
    if getattr(args, "reps", None) is not None:
        cfg.replications = args.reps
    if getattr(args, "workers", None) is not None:
        cfg.workers = args.workers
    if getattr(args, "bayes", False):
        cfg.bayes = True
    if getattr(args, "baseline", False):
        cfg.baseline = True
    return cfg


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    obs, path = simulate_observations(cfg.path, cfg.sampling, cfg.noise, cfg.master_seed)
    write_csv(obs, args.out)
    info = {
        "out": args.out,
        "true_qcov": true_quadratic_covariation(path),
        "n": cfg.sampling.n,
        "T": cfg.path.T,
        "observations": [len(obs.times[0]), len(obs.times[1])],
    }
    print(json.dumps(info, indent=2))
    return 0


def cmd_estimate(args) -> int:
    cfg = _load_config(args)
    obs = read_csv(args.obs, n=cfg.sampling.n if args.config else None)
    model = cfg.make_model()
    block_cfg = cfg.blocks if cfg.blocks is not None else auto_block_config(obs)
    report = estimate_pipeline(obs, model, block_cfg=block_cfg, with_bayes=cfg.bayes)
    payload = report.to_json()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(payload + "\n")
    print(payload)
    return 0


def cmd_montecarlo(args) -> int:
    cfg = _load_config(args)
    t0 = time.perf_counter()
    table = run_montecarlo(cfg, log=lambda msg: print(msg, file=sys.stderr))
    table.write_csv(args.out)
    print(
        f"montecarlo: {table.completed}/{cfg.replications} replications in "
        f"{time.perf_counter() - t0:.1f}s ({len(table.failures)} failures) -> {args.out}",
        file=sys.stderr,
    )
    return 0


def cmd_limits(args) -> int:
    cfg = _load_config(args)
    if cfg.model != "constant":
        print("limits: only the constant model has config-level limit objects",
              file=sys.stderr)
        return 2
    ctx = LimitContext(
        model=cfg.make_model(), sigma_star=np.asarray(cfg.path.sigma),
        v_star=np.asarray(cfg.noise.variances),
        a=(cfg.sampling.lambda1, cfg.sampling.lambda2), T=cfg.path.T,
    )
    out = {
        "gamma1": information_matrix(ctx).tolist(),
        "gamma2": noise_information_matrix(ctx).tolist(),
        "theoretical_min_std": theoretical_min_std(ctx, cfg.sampling.n),
        "n": cfg.sampling.n,
    }
    payload = json.dumps(out, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(payload + "\n")
    print(payload)
    return 0


def cmd_bench(args) -> int:
    from .benchmark import format_benchmark, run_benchmark

    rows = run_benchmark(n=args.n, seed=args.seed or 0)
    print(format_benchmark(rows))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blockqmle",
        description="Block quasi-likelihood estimation for noisy nonsynchronous diffusions",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=False):
        p.add_argument("--config", help="JSON experiment configuration")
        p.add_argument("--seed", type=int, help="master seed (overrides config)")
        if out_required:
            p.add_argument("--out", required=True, help="output file path")
        else:
            p.add_argument("--out", help="output file path")

    p = sub.add_parser("simulate", help="write a simulated observation CSV")
    common(p, out_required=True)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate from an observation CSV")
    p.add_argument("--obs", required=True, help="observation CSV path")
    p.add_argument("--bayes", action="store_true", help="also compute the posterior mean")
    common(p)
    p.set_defaults(fn=cmd_estimate)

    p = sub.add_parser("montecarlo", help="replicated simulate-estimate study")
    p.add_argument("--reps", type=int, help="replications (overrides config)")
    p.add_argument("--workers", type=int, help="parallel workers (overrides config)")
    p.add_argument("--bayes", action="store_true", help="also compute posterior means")
    p.add_argument("--baseline", action="store_true",
                   help="include the previous-tick realized covariance baseline")
    common(p, out_required=True)
    p.set_defaults(fn=cmd_montecarlo)

    p = sub.add_parser("limits", help="limit objects for a configuration")
    common(p)
    p.set_defaults(fn=cmd_limits)

    p = sub.add_parser("bench", help="benchmark compiled vs pure kernels")
    p.add_argument("--n", type=int, default=5000, help="simulated frequency index")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
