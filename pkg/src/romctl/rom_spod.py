"""Nonlinear Galerkin reduced model built on the periodic shift ansatz.

The reduced state couples mode amplitudes with a scalar shift; the mass matrix
[[I, N a], [a^T N^T, a^T M2 a]] is inverted per step through the Schur
complement on the scalar block, which stays positive whenever the modes and
their derivatives are independent and the amplitudes stay away from zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .basis import ModeBasis
from .control import ControlShapes, operator_norm_B, signal_norm_sq
from .discretization import SpaceTimeGrid, central_derivative, check_field
from .transform import shift_field, split_shift


class SingularMassError(RuntimeError):
    """Raised when the reduced mass matrix degenerates during a sweep."""

    def __init__(self, step: int, detail: str):
        self.step = step
        super().__init__(f"reduced mass matrix is numerically singular at step {step}: {detail}")


@dataclass(frozen=True)
class SpodRomOperators:
    N: np.ndarray             # (r, r) skew pairing of modes with mode slopes
    M2: np.ndarray            # (r, r) Gram matrix of mode slopes
    B1_table: np.ndarray      # (n_samples, r, m) shifted modes against shapes
    B2_table: np.ndarray      # (n_samples, r, m) shift-derivative against shapes
    B3_table: np.ndarray      # (n_samples, r, m) shifted mode curvature against shapes
    sample_shifts: np.ndarray  # (n_samples,) equispaced over [0, l)
    gram_cross: np.ndarray    # (r, r) one-cell cross Gram of the modes
    alpha0: np.ndarray        # (r,)
    z0: float
    l: float

    @property
    def r(self) -> int:
        return self.N.shape[0]

    @property
    def m(self) -> int:
        return self.B1_table.shape[2]

    def B1(self, z: float) -> np.ndarray:
        return lookup_B(self.B1_table, self.sample_shifts, self.l, z)

    def B2(self, z: float) -> np.ndarray:
        return lookup_B(self.B2_table, self.sample_shifts, self.l, z)

    def B3(self, z: float) -> np.ndarray:
        return lookup_B(self.B3_table, self.sample_shifts, self.l, z)

    def lift_gram(self, frac: float) -> np.ndarray:
        """Gram matrix of the fractionally shifted modes.

        Linear interpolation between node rotations contracts: the Gram of
        the shifted modes depends only on the fractional cell offset,
        ((1-f)^2 + f^2) I + f (1-f) C with C the one-cell cross Gram.
        """
        return ((1.0 - frac) ** 2 + frac**2) * np.eye(self.r) + (
            frac * (1.0 - frac)
        ) * self.gram_cross

    def lift_gram_rate(self, frac: float, dx: float) -> np.ndarray:
        """d/dz of `lift_gram` along the shift (zero at aligned shifts by the
        symmetric one-sided average)."""
        if frac == 0.0:
            return np.zeros_like(self.gram_cross)
        return ((4.0 * frac - 2.0) * np.eye(self.r) + (1.0 - 2.0 * frac) * self.gram_cross) / dx


@dataclass(frozen=True)
class SpodReducedTrajectory:
    alpha: np.ndarray  # (r, n_t)
    z: np.ndarray      # (n_t,)


@dataclass(frozen=True)
class SpodAdjointTrajectory:
    lambda_a: np.ndarray  # (r, n_t)
    z_a: np.ndarray       # (n_t,)


@dataclass(frozen=True)
class SmallnessCertificate:
    """Sufficient condition for the reduced solve to exist on the whole horizon."""

    bound: float
    u_norm_sq: float

    @property
    def zeta(self) -> float:
        return self.bound - self.u_norm_sq

    @property
    def satisfied(self) -> bool:
        return self.u_norm_sq < self.bound


def assemble_spod_rom(
    basis: ModeBasis,
    shapes: ControlShapes,
    y0: np.ndarray,
    grid: SpaceTimeGrid,
    n_samples: int,
) -> SpodRomOperators:
    """Assemble the shift-independent matrices plus shift-sampled control
    pairings on an equispaced table over [0, l)."""
    if n_samples < 2:
        raise ValueError(f"need at least 2 shift samples for interpolation, got {n_samples}")
    if basis.frame != "stationary":
        raise ValueError(f"reduced model needs stationary-frame modes, got frame={basis.frame!r}")
    y0 = check_field(y0, grid, "y0")
    Phi = basis.modes
    r = basis.r
    dPhi = central_derivative(Phi, grid, 1)
    ddPhi = central_derivative(Phi, grid, 2)

    dx = grid.dx
    N = -dx * (Phi.T @ dPhi)
    M2 = dx * (dPhi.T @ dPhi)

    sample_shifts = (grid.l / n_samples) * np.arange(n_samples)
    stacked = np.column_stack([Phi, dPhi, ddPhi])  # one shift call per sample
    B1 = np.empty((n_samples, r, shapes.m))
    B2 = np.empty_like(B1)
    B3 = np.empty_like(B1)
    for s, z in enumerate(sample_shifts):
        shifted = shift_field(stacked, z, grid)
        G = dx * (shifted.T @ shapes.shapes)
        B1[s] = G[:r]
        B2[s] = -G[r : 2 * r]   # d/dz of the shifted mode is minus its shifted slope
        B3[s] = G[2 * r :]

    gram_cross = dx * (Phi.T @ (np.roll(Phi, 1, axis=0) + np.roll(Phi, -1, axis=0)))
    return SpodRomOperators(
        N=N,
        M2=M2,
        B1_table=B1,
        B2_table=B2,
        B3_table=B3,
        sample_shifts=sample_shifts,
        gram_cross=gram_cross,
        alpha0=dx * (Phi.T @ y0),
        z0=0.0,
        l=grid.l,
    )


def lookup_B(table: np.ndarray, sample_shifts: np.ndarray, l: float, z: float) -> np.ndarray:
    """Periodic linear interpolation of a shift-sampled table."""
    n_samples = table.shape[0]
    if n_samples == 0:
        raise ValueError("empty shift table")
    step = l / n_samples
    s = (float(z) % l) / step
    k = int(np.floor(s)) % n_samples
    frac = s - np.floor(s)
    if frac == 0.0:
        return table[k]
    return (1.0 - frac) * table[k] + frac * table[(k + 1) % n_samples]


def _schur_solve(
    N: np.ndarray,
    M2: np.ndarray,
    alpha: np.ndarray,
    rhs_a: np.ndarray,
    rhs_z: float,
    step: int,
) -> tuple[np.ndarray, float]:
    """Solve [[I, b], [b^T, c]] (x, w) = (rhs_a, rhs_z) with b = N alpha and
    c = alpha^T M2 alpha via the scalar Schur complement."""
    b = N @ alpha
    c = float(alpha @ (M2 @ alpha))
    s = c - float(b @ b)
    scale = max(1.0, c, float(b @ b))
    if not math.isfinite(s) or s <= 1e-12 * scale:
        raise SingularMassError(step, f"Schur complement {s:.3e} vs scale {scale:.3e}")
    w = (rhs_z - float(b @ rhs_a)) / s
    x = rhs_a - b * w
    return x, w


def solve_spod_state(
    ops: SpodRomOperators,
    u: np.ndarray,
    grid: SpaceTimeGrid,
) -> SpodReducedTrajectory:
    """Explicit Euler for the coupled amplitude/shift dynamics."""
    u = np.asarray(u, dtype=float)
    if u.shape != (ops.m, grid.n_t):
        raise ValueError(f"control has shape {u.shape}, expected ({ops.m}, {grid.n_t})")
    if float(ops.alpha0 @ ops.alpha0) == 0.0:
        raise SingularMassError(0, "initial amplitudes are zero")
    dt, v = grid.dt, grid.v
    r = ops.r
    alpha = np.empty((r, grid.n_t))
    zpath = np.empty(grid.n_t)
    a = ops.alpha0.copy()
    z = float(ops.z0)
    alpha[:, 0] = a
    zpath[0] = z
    for j in range(grid.n_t - 1):
        rhs_a = v * (ops.N @ a) + ops.B1(z) @ u[:, j]
        rhs_z = v * float(a @ (ops.M2 @ a)) + float(a @ (ops.B2(z) @ u[:, j]))
        da, dz = _schur_solve(ops.N, ops.M2, a, rhs_a, rhs_z, j)
        a = a + dt * da
        z = z + dt * dz
        if not (np.all(np.isfinite(a)) and math.isfinite(z)):
            raise SingularMassError(j + 1, "non-finite reduced state")
        alpha[:, j + 1] = a
        zpath[j + 1] = z
    return SpodReducedTrajectory(alpha=alpha, z=zpath)


def solve_spod_adjoint(
    ops: SpodRomOperators,
    traj: SpodReducedTrajectory,
    u: np.ndarray,
    target: np.ndarray,
    basis: ModeBasis,
    grid: SpaceTimeGrid,
) -> SpodAdjointTrajectory:
    """Backward sweep of the linearized coupled system from zero terminal data.

    The amplitude/shift rates entering the coefficients are forward differences
    of the stored trajectory. The tracking source differentiates the lifted
    cost exactly: the target column is paired in the co-moving frame (the one
    step that scales with the full dimension) and the fractional-shift Gram of
    the interpolated lift replaces the identity, so that the gradient is
    consistent with the cost the model actually reports.
    """
    u = np.asarray(u, dtype=float)
    target = np.asarray(target, dtype=float)
    n_t, dt, v = grid.n_t, grid.dt, grid.v
    if target.shape != (grid.n, n_t):
        raise ValueError(f"target has shape {target.shape}, expected ({grid.n}, {n_t})")
    Phi = basis.modes
    dx = grid.dx

    alpha, zpath = traj.alpha, traj.z
    adot = np.diff(alpha, axis=1) / dt        # rate used at node j for j < n_t-1
    zdot = np.diff(zpath) / dt

    lam = np.zeros((ops.r, n_t))
    za = np.zeros(n_t)
    cur_l = lam[:, -1]
    cur_z = 0.0
    for j in range(n_t - 1, 0, -1):
        a = alpha[:, j]
        z = zpath[j]
        jd = min(j, n_t - 2)
        ad_j = adot[:, jd]
        zd_j = zdot[jd]
        uj = u[:, j]
        B2z = ops.B2(z)
        B2u = B2z @ uj
        B3u = ops.B3(z) @ uj

        # exact derivative of 1/2 ||S(z) Phi a - y_d||^2 wrt (a, z)
        k, frac = split_shift(z, grid)
        yd = target[:, j]
        ra = np.roll(yd, -k)
        rb = np.roll(yd, -(k + 1))
        if frac == 0.0:
            w = ra
            slope_pair = 0.5 * (rb - np.roll(yd, -(k - 1)))
        else:
            w = (1.0 - frac) * ra + frac * rb
            slope_pair = rb - ra
        lifted_g = Phi @ a
        t_alpha = dx * (Phi.T @ w) - ops.lift_gram(frac) @ a
        t_z = float(lifted_g @ slope_pair) - 0.5 * float(
            a @ (ops.lift_gram_rate(frac, dx) @ a)
        )

        NTl = ops.N.T @ cur_l
        # coefficient of the scalar adjoint: the skew pairing contributes
        # -2 N alpha_dot (operator adjoint plus mass-matrix rate; they add,
        # not cancel, because N is skew)
        e12 = -2.0 * (ops.N @ ad_j) + 2.0 * (zd_j - v) * (ops.M2 @ a) - B2u
        rhs_a = (zd_j - v) * NTl + e12 * cur_z + t_alpha
        rhs_z = (
            -float(ad_j @ NTl)
            - float(uj @ (B2z.T @ cur_l))
            + (-2.0 * float(a @ (ops.M2 @ ad_j)) - float(B3u @ a)) * cur_z
            + t_z
        )
        dl, dz = _schur_solve(ops.N, ops.M2, a, rhs_a, rhs_z, j)
        cur_l = cur_l - dt * dl
        cur_z = cur_z - dt * dz
        if not (np.all(np.isfinite(cur_l)) and math.isfinite(cur_z)):
            raise SingularMassError(j - 1, "non-finite reduced adjoint")
        lam[:, j - 1] = cur_l
        za[j - 1] = cur_z
    return SpodAdjointTrajectory(lambda_a=lam, z_a=za)


def gradient_spod(
    ops: SpodRomOperators,
    traj: SpodReducedTrajectory,
    adjoint: SpodAdjointTrajectory,
    u: np.ndarray,
    mu: float,
) -> np.ndarray:
    """Column j is mu u(t_j) + B1(z_j)^T lambda(t_j) + B2(z_j)^T alpha(t_j) z_a(t_j)."""
    u = np.asarray(u, dtype=float)
    g = mu * u.copy()
    for j in range(u.shape[1]):
        z = traj.z[j]
        g[:, j] += ops.B1(z).T @ adjoint.lambda_a[:, j]
        g[:, j] += (ops.B2(z).T @ traj.alpha[:, j]) * adjoint.z_a[j]
    return g


def lift_spod(basis: ModeBasis, traj: SpodReducedTrajectory, grid: SpaceTimeGrid) -> np.ndarray:
    """Reconstruct full-order snapshots: column j is the shifted mode combination."""
    alpha = traj.alpha
    if alpha.shape[0] != basis.r:
        raise ValueError(f"amplitudes have {alpha.shape[0]} rows, basis has r={basis.r}")
    out = np.empty((basis.modes.shape[0], alpha.shape[1]))
    for j in range(alpha.shape[1]):
        out[:, j] = shift_field(basis.modes @ alpha[:, j], traj.z[j], grid)
    return out


def certify_smallness(
    ops: SpodRomOperators,
    u: np.ndarray,
    shapes: ControlShapes,
    grid: SpaceTimeGrid,
) -> SmallnessCertificate:
    """Check the control against the well-posedness bound
    ||u||^2 < ||alpha0||^2 / (||B||^2 e T r)."""
    a0_sq = float(ops.alpha0 @ ops.alpha0)
    if a0_sq == 0.0:
        raise ValueError("initial amplitudes are zero; the bound is vacuous")
    bnorm = operator_norm_B(shapes, grid)
    bound = a0_sq / (bnorm**2 * math.e * grid.T * ops.r)
    return SmallnessCertificate(bound=bound, u_norm_sq=signal_norm_sq(u, grid.dt))
