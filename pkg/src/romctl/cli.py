"""Command-line entry point: run scenarios, mode sweeps, rank studies, and
gradient checks from flat config files."""
from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .experiments import (
    ConfigError,
    ScenarioConfig,
    build_model,
    fd_gradient_check,
    parse_config,
    run_rank_study,
    run_scenario,
    smooth_random_signal,
)


def _load(args) -> ScenarioConfig:
    cfg = parse_config(args.config)
    if args.out is not None:
        cfg = replace(cfg, out=args.out)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _worker_count(n_jobs: int) -> int:
    cap = os.environ.get("ROMCTL_THREADS")
    workers = min(n_jobs, os.cpu_count() or 1)
    if cap:
        workers = max(1, min(workers, int(cap)))
    return workers


def _sweep_job(payload) -> tuple[int, int]:
    cfg, r = payload
    return r, run_scenario(replace(cfg, modes=r, mode_tol=None, out=str(Path(cfg.out) / f"modes_{r:04d}")), quiet=True)


def cmd_run(args) -> int:
    return run_scenario(_load(args), quiet=args.quiet)


def cmd_sweep(args) -> int:
    cfg = _load(args)
    mode_counts = [int(v) for v in args.modes.split(",") if v.strip()]
    if not mode_counts:
        print("sweep needs at least one mode count", file=sys.stderr)
        return 2
    jobs = [(cfg, r) for r in mode_counts]
    status = 0
    workers = _worker_count(len(jobs))
    if workers == 1:
        results = map(_sweep_job, jobs)
    else:
        pool = ProcessPoolExecutor(max_workers=workers)
        results = pool.map(_sweep_job, jobs)
    for r, code in results:
        if not args.quiet:
            print(f"modes={r}: exit {code}")
        status = max(status, code)
    if workers > 1:
        pool.shutdown()
    return status


def cmd_rank_study(args) -> int:
    return run_rank_study(_load(args), quiet=args.quiet)


def cmd_gradient_check(args) -> int:
    cfg = _load(args)
    model, grid, shapes, _, _ = build_model(cfg)
    rng = np.random.default_rng(cfg.seed)
    u = smooth_random_signal(rng, shapes.m, grid.n_t, 0.05)
    errors = fd_gradient_check(model, u, seed=cfg.seed)
    worst = max(errors)
    if not args.quiet:
        for k, e in enumerate(errors):
            print(f"direction {k + 1:2d}: relative error {e:.3e}")
        print(f"worst relative error: {worst:.3e}")
    return 0 if worst < 1e-3 else 1


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="romctl",
        description="Optimal control of 1D periodic advection with full-order and reduced models",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, extra in (
        ("run", cmd_run, ()),
        ("sweep", cmd_sweep, ("modes",)),
        ("rank-study", cmd_rank_study, ()),
        ("gradient-check", cmd_gradient_check, ()),
    ):
        p = sub.add_parser(name)
        p.add_argument("config", help="path to a flat key = value config file")
        if "modes" in extra:
            p.add_argument("--modes", required=True, help="comma-separated mode counts")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--seed", type=int, default=None, help="rng seed (overrides config)")
        p.add_argument("--quiet", action="store_true")
        p.set_defaults(fn=fn)
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
