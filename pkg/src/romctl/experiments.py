"""Scenario assembly, configuration files, and the artifact-producing runs."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import fom
from .basis import save_spectrum_csv, weighted_svd
from .control import FMT, ControlShapes, build_fourier_shapes, save_control_csv
from .discretization import SpaceTimeGrid
from .models import FomModel, PodModel, SpodModel
from .optimizer import (
    PHASES,
    ControlledModel,
    ModeRule,
    OptimizerConfig,
    OptimizerReport,
    optimize,
)
from .transform import shift_field, transform_snapshots, uncontrolled_shift_path


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TargetSpec:
    """Piecewise-constant target velocity: the wave travels at v until the
    first kink, then at the listed velocities after each kink time fraction."""

    segments: tuple[tuple[float, float], ...] = ()

    def __post_init__(self) -> None:
        fracs = [f for f, _ in self.segments]
        if any(not 0.0 < f < 1.0 for f in fracs):
            raise ConfigError(f"kink fractions must lie in (0, 1), got {fracs}")
        if any(b <= a for a, b in zip(fracs, fracs[1:])):
            raise ConfigError(f"kink fractions must be strictly increasing, got {fracs}")

    def displacement(self, t: np.ndarray, grid: SpaceTimeGrid) -> np.ndarray:
        """Integral of the target velocity from 0 to each time."""
        t = np.asarray(t, dtype=float)
        times = [0.0] + [f * grid.T for f, _ in self.segments]
        vels = [grid.v] + [v for _, v in self.segments]
        zeta = np.zeros_like(t)
        base = 0.0
        for k, (t0, v) in enumerate(zip(times, vels)):
            t1 = times[k + 1] if k + 1 < len(times) else np.inf
            inside = (t >= t0) & (t < t1)
            zeta[inside] = base + v * (t[inside] - t0)
            if np.isfinite(t1):
                base += v * (t1 - t0)
        return zeta


def single_tilt_target(tilt_factor: float, v: float) -> TargetSpec:
    return TargetSpec(segments=((0.75, tilt_factor * v),))


def double_tilt_target(tilt_factor: float, v: float) -> TargetSpec:
    return TargetSpec(segments=((0.25, tilt_factor * v), (0.75, v)))


def build_target(grid: SpaceTimeGrid, y0: np.ndarray, spec: TargetSpec) -> np.ndarray:
    """Snapshot matrix of the target wave: column j is y0 shifted by the
    accumulated target displacement at t_j."""
    zeta = spec.displacement(grid.t, grid)
    out = np.empty((grid.n, grid.n_t))
    for j in range(grid.n_t):
        out[:, j] = shift_field(y0, zeta[j], grid)
    return out


def gaussian_initial_condition(grid: SpaceTimeGrid) -> np.ndarray:
    return np.exp(-((grid.x - grid.l / 12.0) ** 2))


def smooth_random_signal(rng, m: int, n_t: int, amp: float = 1.0, harmonics: int = 3) -> np.ndarray:
    """Random control signal that is smooth in time (a few Fourier harmonics),
    so that its identity is resolution independent."""
    tg = np.linspace(0.0, 1.0, n_t)
    sig = np.zeros((m, n_t))
    for q in range(1, harmonics + 1):
        sig += rng.standard_normal((m, 1)) * np.sin(np.pi * q * tg)
        sig += rng.standard_normal((m, 1)) * np.cos(np.pi * q * tg)
    return amp * sig


@dataclass(frozen=True)
class ScenarioConfig:
    l: float = 100.0
    n: int = 3201
    T: float = 136.2642
    n_t: int = 2400
    v: float = 0.55
    xi: int = 20
    mu: float = 1e-3
    beta: float = 1e-5
    omega0: float = 1.0
    n_iter: int = 20000
    n_samples: int = 800
    refine_every: int = 5
    bb_switch_threshold: float = 5e-3
    model: str = "fom"
    modes: int | None = None
    mode_tol: float | None = None
    problem: str = "single_tilt"
    tilt_factor: float = 0.0
    kinks: tuple[float, ...] = ()
    kink_velocities: tuple[float, ...] = ()  # in units of v, paired with kinks
    eigenfunction_basis: bool = False
    rank_study_every: int = 10
    seed: int = 0
    out: str = "out"

    def grid(self) -> SpaceTimeGrid:
        return SpaceTimeGrid(l=self.l, n=self.n, T=self.T, n_t=self.n_t, v=self.v)

    def target_spec(self) -> TargetSpec:
        if self.problem == "custom":
            if len(self.kinks) != len(self.kink_velocities):
                raise ConfigError("custom problem needs matching kinks and kink_velocities")
            return TargetSpec(
                segments=tuple((f, w * self.v) for f, w in zip(self.kinks, self.kink_velocities))
            )
        if self.problem == "double_tilt":
            return double_tilt_target(self.tilt_factor, self.v)
        if self.problem == "single_tilt":
            return single_tilt_target(self.tilt_factor, self.v)
        raise ConfigError(f"unknown problem {self.problem!r}")

    def mode_rule(self) -> ModeRule:
        if self.mode_tol is not None:
            return ModeRule.tolerance(self.mode_tol)
        if self.modes is not None:
            return ModeRule.fixed(self.modes)
        return ModeRule.fixed(2 * self.xi + 2)  # invariant-subspace dimension

    def optimizer_config(self) -> OptimizerConfig:
        return OptimizerConfig(
            mu=self.mu,
            beta=self.beta,
            omega0=self.omega0,
            n_iter=self.n_iter,
            n_samples=self.n_samples,
            mode_rule=self.mode_rule(),
            refine_every=self.refine_every,
            bb_switch_threshold=self.bb_switch_threshold,
        )


_PARSERS = {
    "l": float, "n": int, "T": float, "n_t": int, "v": float, "xi": int,
    "mu": float, "beta": float, "omega0": float, "n_iter": int,
    "n_samples": int, "refine_every": int, "bb_switch_threshold": float,
    "model": str, "modes": int, "mode_tol": float, "problem": str,
    "tilt_factor": float, "eigenfunction_basis": lambda s: s.lower() in ("1", "true", "yes"),
    "rank_study_every": int, "seed": int, "out": str,
    "kinks": lambda s: tuple(float(v) for v in s.split(",") if v.strip()),
    "kink_velocities": lambda s: tuple(float(v) for v in s.split(",") if v.strip()),
}


def parse_config(path: str | Path) -> ScenarioConfig:
    """Flat key = value file with # comments; unknown keys are errors, missing
    keys take the defaults."""
    path = Path(path)
    overrides: dict = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _PARSERS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            overrides[key] = _PARSERS[key](value)
        except ConfigError:
            raise
        except Exception as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from exc
    try:
        cfg = ScenarioConfig(**overrides)
        cfg.target_spec()
        cfg.grid()
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if cfg.model not in ("fom", "pod", "spod"):
        raise ConfigError(f"{path}: model must be fom, pod, or spod, got {cfg.model!r}")
    return cfg


def build_model(cfg: ScenarioConfig) -> tuple[ControlledModel, SpaceTimeGrid, ControlShapes, np.ndarray, np.ndarray]:
    grid = cfg.grid()
    shapes = build_fourier_shapes(grid, cfg.xi)
    y0 = gaussian_initial_condition(grid)
    target = build_target(grid, y0, cfg.target_spec())
    rule = cfg.mode_rule()
    if cfg.model == "fom":
        model: ControlledModel = FomModel(grid, shapes, y0, target, cfg.mu)
    elif cfg.model == "pod":
        model = PodModel(grid, shapes, y0, target, cfg.mu, rule)
    else:
        model = SpodModel(
            grid, shapes, y0, target, cfg.mu, rule,
            n_samples=cfg.n_samples, eigenfunction_basis=cfg.eigenfunction_basis,
        )
    return model, grid, shapes, y0, target


def _write_history_csvs(outdir: Path, report: OptimizerReport) -> None:
    with open(outdir / "cost_history.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "J", "tracking", "regularization"])
        for r in report.records:
            w.writerow([r.iteration, FMT % r.total, FMT % r.tracking, FMT % r.regularization])
    with open(outdir / "gradient_history.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "grad_norm", "rel_grad_norm", "omega"])
        for r in report.records:
            w.writerow([r.iteration, FMT % r.grad_norm, FMT % r.rel_grad_norm, FMT % r.omega])
    with open(outdir / "modes_per_iteration.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "modes", "refined"])
        for r in report.records:
            w.writerow([r.iteration, r.modes, int(r.refined)])
    with open(outdir / "timings.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", *PHASES, "wall"])
        for r in report.records:
            w.writerow([r.iteration] + [FMT % r.timings[p] for p in PHASES] + [FMT % r.wall])


_PLOT_SCRIPT = """\
# gnuplot command file for the run artifacts
set datafile separator ','
set key autotitle columnhead
set logscale y
set xlabel 'iteration'
set ylabel 'J'
plot 'cost_history.csv' using 1:2 with lines
pause -1
set ylabel 'relative gradient norm'
plot 'gradient_history.csv' using 1:3 with lines
pause -1
set ylabel 'modes'
unset logscale y
plot 'modes_per_iteration.csv' using 1:2 with steps
pause -1
"""


def run_scenario(cfg: ScenarioConfig, quiet: bool = False) -> int:
    """Run one optimization scenario and write all artifacts; returns the exit
    status (0 on converged or max_iter, 3 on divergence)."""
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    model, grid, shapes, y0, target = build_model(cfg)
    u0 = np.zeros((shapes.m, grid.n_t))

    spectra: list[tuple[int, np.ndarray]] = []

    def snoop_spectrum(i: int, u: np.ndarray) -> None:
        sig = getattr(model, "last_spectrum", None)
        if sig is not None and (not spectra or spectra[-1][1] is not sig):
            spectra.append((i, sig))

    u, report = optimize(
        model, u0, cfg.optimizer_config(),
        stream=outdir / "iterations.csv",
        callback=snoop_spectrum,
    )

    _write_history_csvs(outdir, report)
    for i, sigma in spectra:
        save_spectrum_csv(outdir / f"singular_values_iter{i:05d}.csv", sigma)
    save_control_csv(outdir / "final_control.csv", u)
    if report.status != "diverged":
        final_state = model.lift(u) if hasattr(model, "lift") else fom.solve_state(
            grid, shapes, u, y0
        )
        fom.save_snapshots_bin(outdir / "final_state.bin", final_state)
    (outdir / "plots.gp").write_text(_PLOT_SCRIPT)

    meta = {
        "config": {k: (list(v) if isinstance(v, tuple) else v) for k, v in vars(cfg).items()},
        "status": report.status,
        "iterations": report.iterations,
        "final_cost": report.final_cost,
        "tilt_factor": cfg.tilt_factor,
        "cfl": grid.cfl,
        "modes_final": report.records[-1].modes if report.records else 0,
    }
    (outdir / "run_meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    if not quiet:
        print(
            f"[{model.describe()}] {report.status} after {report.iterations} iterations, "
            f"J = {report.final_cost:.6g} -> {outdir}"
        )
    return 0 if report.status in ("converged", "max_iter") else 3


def run_rank_study(cfg: ScenarioConfig, quiet: bool = False) -> int:
    """Optimize with the invariant-subspace basis while recording the relative
    singular values sigma_{m+1}/sigma_1 and sigma_{m+2}/sigma_1 of the
    co-moving snapshot matrix every few iterations."""
    cfg = replace(cfg, model="spod", eigenfunction_basis=True)
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    model, grid, shapes, y0, target = build_model(cfg)
    path = uncontrolled_shift_path(grid)
    m = shapes.m
    rows: list[tuple[int, float, float]] = []

    def ratios(u: np.ndarray) -> tuple[float, float]:
        Q = fom.solve_state(grid, shapes, u, y0)
        _, sigma = weighted_svd(transform_snapshots(Q, path, grid), grid)
        s1 = sigma[0]
        get = lambda k: float(sigma[k] / s1) if k < len(sigma) else 0.0
        return get(m), get(m + 1)

    u0 = np.zeros((m, grid.n_t))
    rows.append((0, *ratios(u0)))

    def spy(i: int, u: np.ndarray) -> None:
        if i % cfg.rank_study_every == 0:
            rows.append((i, *ratios(u)))

    u, report = optimize(model, u0, cfg.optimizer_config(), callback=spy)
    with open(outdir / "rank_study.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "sv_ratio_m_plus_1", "sv_ratio_m_plus_2"])
        for i, r1, r2 in rows:
            w.writerow([i, FMT % r1, FMT % r2])
    if not quiet:
        worst = max(r2 for _, _, r2 in rows)
        print(
            f"[rank-study] {report.status} after {report.iterations} iterations; "
            f"max sigma_(m+2)/sigma_1 = {worst:.3e} -> {outdir}"
        )
    return 0 if report.status in ("converged", "max_iter") else 3


def fd_gradient_check(
    model: ControlledModel,
    u: np.ndarray,
    n_directions: int = 10,
    eps: float = 1e-5,
    seed: int = 0,
) -> list[float]:
    """Relative errors between the adjoint directional derivative and central
    finite differences of the model cost, over random smooth directions."""
    rng = np.random.default_rng(seed)
    weight = model.signal_weight
    model.refine_basis(u)
    _, g = model.evaluate(u)
    m, n_t = u.shape
    errors = []
    for _ in range(n_directions):
        du = smooth_random_signal(rng, m, n_t)
        jp = model.cost_only(u + eps * du).total
        jm = model.cost_only(u - eps * du).total
        fd = (jp - jm) / (2.0 * eps)
        ad = weight * float(np.sum(g * du))
        denom = max(abs(fd), 1e-300)
        errors.append(abs(ad - fd) / denom)
    return errors
