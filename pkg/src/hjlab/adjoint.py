"""Backward Fokker-Planck solver and the duality functionals built on it.

The density solves ``-rho_t - eps*Lap rho - div(D_pH(Du) rho) = 0`` backward
from ``rho(tau) = rho_tau``.  The discrete operator is the transpose of the
forward Lax-Friedrichs step, so ``<u, rho>`` telescopes exactly and mass and
positivity are inherited from the forward monotonicity.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import asdict, dataclass

import numpy as np

from .errors import CFLError, GridError, StructureError
from .fields import PERIODIC, Grid, ScalarField, Trajectory, check_finite, lp_norm
from .forward import (
    ALPHA_GLOBAL,
    IMPLICIT,
    LLF,
    ImplicitDiffusion,
    LaxFriedrichs,
    output_ladder,
    source_values,
)
from .hamiltonians import HamiltonianSpec

MASS_TOL = 1e-12


def gaussian_density(grid: Grid, centre=None, width: float | None = None) -> ScalarField:
    """Discrete Gaussian of unit discrete mass (default width ``3h``, centred mid-domain)."""
    h = max(grid.spacing)
    width = 3.0 * h if width is None else float(width)
    if centre is None:
        centre = [lo + 0.5 * L for lo, L in zip(grid.lower, grid.extent)]
    centre = np.atleast_1d(np.asarray(centre, dtype=float))
    r2 = np.zeros(grid.shape)
    for axis, X in enumerate(grid.mesh()):
        d = X - centre[axis]
        if grid.topology == PERIODIC:
            L = grid.extent[axis]
            d = (d + 0.5 * L) % L - 0.5 * L
        r2 = r2 + d * d
    values = np.exp(-0.5 * r2 / width**2)
    values /= values.sum() * grid.cell_volume
    return ScalarField(grid, values)


@dataclass(frozen=True, eq=False)
class AdjointProblem:
    forward: Trajectory
    H: HamiltonianSpec
    epsilon: float
    tau: float
    rho_tau: ScalarField | None = None
    cfl_safety: float = 0.4

    def __post_init__(self) -> None:
        self.forward.index_of(self.tau)
        if self.rho_tau is None:
            object.__setattr__(self, "rho_tau", gaussian_density(self.forward.grid))
        rho = self.rho_tau
        if rho.grid != self.forward.grid:
            raise GridError("terminal density and forward solution live on different grids")
        if np.any(rho.values < 0):
            raise ValueError("terminal density must be nonnegative")
        mass = rho.values.sum() * rho.grid.cell_volume
        if abs(mass - 1.0) > MASS_TOL:
            raise ValueError(f"terminal density must have unit mass, got {mass!r}")


def _adjoint_explicit(rho: np.ndarray, b: np.ndarray, D: np.ndarray, grid: Grid,
                      dt: float) -> np.ndarray:
    """Transpose of ``du -> du + dt*(-b.D_c du + sum_k D_k Lap_k du)``.

    Written as face fluxes ``Phi = avg(b rho) + diff(D rho)/h`` so that the
    total mass telescopes; boundary faces of bounded grids carry no flux.
    """
    out = rho.copy()
    periodic = grid.topology == PERIODIC
    for k, h in enumerate(grid.spacing):
        q = b[k] * rho
        s = D[k] * rho
        if periodic:
            q_next = np.roll(q, -1, axis=k)
            s_next = np.roll(s, -1, axis=k)
            flux = 0.5 * (q + q_next) + (s_next - s) / h
            out += dt / h * (flux - np.roll(flux, 1, axis=k))
        else:
            n = grid.cells[k]
            lo = [slice(None)] * rho.ndim
            hi = [slice(None)] * rho.ndim
            lo[k] = slice(0, n - 1)
            hi[k] = slice(1, n)
            inner = 0.5 * (q[tuple(lo)] + q[tuple(hi)]) + (s[tuple(hi)] - s[tuple(lo)]) / h
            shape = list(rho.shape)
            shape[k] = 1
            zero = np.zeros(shape)
            faces = np.concatenate([zero, inner, zero], axis=k)
            upper = [slice(None)] * rho.ndim
            lower = [slice(None)] * rho.ndim
            upper[k] = slice(1, None)
            lower[k] = slice(0, -1)
            out += dt / h * (faces[tuple(upper)] - faces[tuple(lower)])
    return out


@dataclass
class AdjointDiagnostics:
    max_mass_defect: float = 0.0
    min_density: float = math.inf
    steps: int = 0
    dt_max: float = 0.0
    # time quadratures matching the discrete pairing: sum_n dt_n <g(u^n), rho^{n+1}>
    hamiltonian_pairing: float = 0.0
    source_pairing: float = 0.0
    gradient_power_pairing: float = 0.0
    mass_integral: float = 0.0
    gamma: float = 2.0

    def to_dict(self) -> dict:
        return asdict(self)


def _substeps(forward: Trajectory, k: int) -> int | None:
    sub = forward.meta.get("substeps")
    if sub is None:
        return None
    return int(sub[k])


def solve_adjoint(prob: AdjointProblem) -> Trajectory:
    """Solve the backward density equation from ``tau`` down to ``0``.

    Frames are reported in increasing time at the forward frame times in
    ``[0, tau]``.  When the forward run stored every step the discrete operator
    is the exact transpose of the forward one; otherwise the forward solution
    is interpolated linearly in time between frames.
    """
    fw = prob.forward
    grid = fw.grid
    meta = fw.meta
    if meta.get("scheme", LLF) != LLF:
        raise StructureError("the adjoint transposes the Lax-Friedrichs scheme only")
    implicit = meta.get("diffusion_mode") == IMPLICIT
    op = LaxFriedrichs(prob.H, grid, prob.epsilon, meta.get("alpha_margin", 1.1), implicit,
                       meta.get("alpha_mode", ALPHA_GLOBAL))
    diffuse = ImplicitDiffusion(grid, prob.epsilon) if implicit else None
    f = meta.get("source")
    k_tau = fw.index_of(prob.tau)
    rho = prob.rho_tau.values.astype(float).copy()
    cell = grid.cell_volume
    diag = AdjointDiagnostics(gamma=prob.H.gamma, min_density=float(rho.min()))
    frames = [ScalarField(grid, rho, fw.times[k_tau])]
    for k in range(k_tau - 1, -1, -1):
        t0, t1 = fw.times[k], fw.times[k + 1]
        u0, u1 = fw.frames[k].values, fw.frames[k + 1].values
        n_sub = _substeps(fw, k)
        if n_sub is None:
            c = op.coefficients(u0)
            speed = np.max(np.abs(prob.H.gradient(c.central)))
            rate = np.sum([speed / h for h in grid.spacing]) + 1.0 / op.step_limit(c)
            n_sub = max(1, math.ceil((t1 - t0) * rate / prob.cfl_safety))
        dt = (t1 - t0) / n_sub
        for j in range(n_sub - 1, -1, -1):
            w = j / n_sub
            u = u0 if j == 0 else (1.0 - w) * u0 + w * u1
            c = op.coefficients(u)
            if dt > op.step_limit(c) * (1 + 1e-9):
                raise CFLError(f"adjoint step {dt:.3e} exceeds the stability limit")
            if diffuse is not None:
                rho = diffuse(rho, dt)
            b = prob.H.gradient(c.central)
            # pairings use the density the explicit step acts on
            t_n = t0 + j * dt
            Hval = prob.H.evaluate(c.central)
            diag.hamiltonian_pairing += dt * cell * float(
                np.sum((np.sum(b * c.central, axis=0) - Hval) * rho)
            )
            fv = source_values(f, grid, t_n)
            diag.source_pairing += dt * cell * float(np.sum(fv * rho))
            pnorm = np.sqrt(np.sum(c.central**2, axis=0))
            diag.gradient_power_pairing += dt * cell * float(np.sum(pnorm**prob.H.gamma * rho))
            diag.mass_integral += dt * cell * float(np.sum(rho))
            rho = _adjoint_explicit(rho, b, c.diffusion, grid, dt)
            mass = rho.sum() * cell
            diag.max_mass_defect = max(diag.max_mass_defect, abs(mass - 1.0))
            diag.min_density = min(diag.min_density, float(rho.min()))
            diag.steps += 1
            diag.dt_max = max(diag.dt_max, dt)
        check_finite(rho, "adjoint density")
        frames.append(ScalarField(grid, rho, t0))
    frames.reverse()
    times = [fr.time for fr in frames]
    return Trajectory(grid, times, frames, {"diagnostics": diag, "tau": prob.tau})


# -- duality functionals -----------------------------------------------------------

def pairing(u: ScalarField, rho: ScalarField) -> float:
    return float(np.sum(u.values * rho.values) * u.grid.cell_volume)


def _check_shared(forward: Trajectory, rho: Trajectory) -> None:
    if forward.grid != rho.grid:
        raise GridError("forward solution and density live on different grids")
    for t in rho.times:
        forward.index_of(t)


@dataclass(frozen=True)
class DualityReport:
    lhs: float
    rhs: float
    residual: float
    tolerance: float
    passed: bool

    @property
    def slack(self) -> float:
        return self.tolerance - self.residual

    def to_dict(self) -> dict:
        return {
            "lhs": self.lhs, "rhs": self.rhs, "residual": self.residual,
            "slack": self.slack, "tolerances": {"residual": self.tolerance},
            "pass": self.passed,
        }


def duality_check(forward: Trajectory, rho: Trajectory, scale: float = 1.0,
                  coefficient: float = 20.0) -> DualityReport:
    """``<u(tau), rho_tau> - <u(0), rho(0)> = iint (D_pH.Du - H) rho + iint f rho``.

    Tolerance ``coefficient * (h + dt) * scale``.
    """
    _check_shared(forward, rho)
    diag: AdjointDiagnostics = rho.meta["diagnostics"]
    tau = rho.times[-1]
    lhs = pairing(forward.at(tau), rho.final) - pairing(forward.at(rho.times[0]), rho.frames[0])
    rhs = diag.hamiltonian_pairing + diag.source_pairing
    h = max(forward.grid.spacing)
    tol = coefficient * (h + diag.dt_max) * scale
    residual = abs(lhs - rhs)
    return DualityReport(lhs, rhs, residual, tol, bool(residual <= tol))


@dataclass(frozen=True)
class CrossReport:
    value: float
    bound: float
    lhs: float
    source_term: float
    mass_term: float

    @property
    def slack(self) -> float:
        return self.bound - self.value

    def holds(self, rel_tol: float = 1e-10) -> bool:
        """``value <= bound`` up to roundoff (the two agree exactly for quadratic ``H``)."""
        return self.slack >= -rel_tol * max(1.0, abs(self.bound))

    def to_dict(self) -> dict:
        return {"value": self.value, "bound": self.bound, "slack": self.slack,
                "lhs": self.lhs, "source_term": self.source_term, "mass_term": self.mass_term}


def cross_functional(forward: Trajectory, rho: Trajectory, gamma: float,
                     H: HamiltonianSpec | None = None) -> CrossReport:
    """``iint |Du|^gamma rho`` against ``(1/C1)[<u,rho>|_0^tau - iint f rho + C~1 iint rho]``.

    Here ``C~1`` is the nonnegative constant of ``D_pH.p - H >= C1 |p|^gamma - C~1``.
    """
    _check_shared(forward, rho)
    H = H or forward.meta.get("hamiltonian")
    if H is None or H.constants.C1 is None or H.constants.C1t is None:
        raise StructureError("the cross bound needs declared coercivity constants")
    diag: AdjointDiagnostics = rho.meta["diagnostics"]
    tau = rho.times[-1]
    lhs = pairing(forward.at(tau), rho.final) - pairing(forward.at(rho.times[0]), rho.frames[0])
    if math.isclose(gamma, diag.gamma):
        value = diag.gradient_power_pairing
    else:
        value = _trapezoid_gradient_power(forward, rho, gamma)
    c = H.constants
    bound = (lhs - diag.source_pairing + c.C1t * diag.mass_integral) / c.C1
    return CrossReport(value, bound, lhs, diag.source_pairing, diag.mass_integral)


def _trapezoid_gradient_power(forward: Trajectory, rho: Trajectory, gamma: float) -> float:
    from .fields import discrete_gradient

    vals = []
    for t, r in zip(rho.times, rho.frames):
        du = discrete_gradient(forward.at(t))
        vals.append(float(np.sum(np.sqrt(np.sum(du**2, axis=0)) ** gamma * r.values))
                    * forward.grid.cell_volume)
    return float(np.trapezoid(vals, rho.times))


# -- continuity equation and L^r stability -------------------------------------

Velocity = Callable[..., np.ndarray]


def _face_velocities(velocity: Velocity, grid: Grid, t: float) -> list[np.ndarray]:
    """Velocity component ``k`` sampled at the faces ``x_k + h_k/2``."""
    faces = []
    for k, h in enumerate(grid.spacing):
        coords = list(grid.mesh())
        coords[k] = coords[k] + 0.5 * h
        faces.append(np.asarray(velocity(*coords, t)[k], dtype=float) * np.ones(grid.shape))
    return faces


def solve_continuity(
    rho0: ScalarField, velocity: Velocity, T: float, epsilon: float = 0.0,
    cfl_safety: float = 0.4, ladder: int = 16, speed: float | None = None,
    face_velocity: Callable[[Grid, float], list[np.ndarray]] | None = None,
) -> Trajectory:
    """Upwind finite volumes for ``rho_t + div(v rho) = eps*Lap rho`` on a torus.

    ``velocity(*coords, t)`` returns the components stacked on the first axis;
    ``face_velocity(grid, t)`` may supply face values directly (e.g. from a
    stream function so the discrete divergence vanishes).
    """
    grid = rho0.grid
    if grid.topology != PERIODIC:
        raise GridError("solve_continuity runs on a torus")
    faces_at = face_velocity or (lambda g, t: _face_velocities(velocity, g, t))
    if speed is None:
        speed = max(
            max(float(np.abs(v).max()) for v in faces_at(grid, t))
            for t in np.linspace(0.0, T, 9)
        )
    h = np.asarray(grid.spacing)
    rate = np.sum(speed / h) + np.sum(2.0 * epsilon / h**2)
    dt_max = cfl_safety / rate if rate > 0 else T
    targets = output_ladder(T, ladder)
    rho = rho0.values.astype(float).copy()
    frames = [ScalarField(grid, rho, 0.0)]
    t = 0.0
    for t_next in targets[1:]:
        n_sub = max(1, math.ceil((t_next - t) / dt_max * (1 - 1e-12)))
        dt = (t_next - t) / n_sub
        for j in range(n_sub):
            vf = faces_at(grid, t + j * dt)
            new = rho.copy()
            for k, hk in enumerate(h):
                nxt = np.roll(rho, -1, axis=k)
                flux = np.maximum(vf[k], 0.0) * rho + np.minimum(vf[k], 0.0) * nxt
                flux = flux - epsilon * (nxt - rho) / hk
                new -= dt / hk * (flux - np.roll(flux, 1, axis=k))
            rho = new
        t = float(t_next)
        check_finite(rho, "density")
        frames.append(ScalarField(grid, rho, t))
    return Trajectory(grid, targets, frames)


@dataclass(frozen=True)
class StabilityReport:
    r: float
    times: np.ndarray
    measured: np.ndarray
    bound: np.ndarray
    tolerance: float

    @property
    def margin(self) -> np.ndarray:
        return self.measured - self.bound

    @property
    def slack(self) -> float:
        """Smallest ``bound - measured`` over the frames."""
        return float(np.min(self.bound - self.measured))

    @property
    def passed(self) -> bool:
        return bool(np.all(self.margin <= self.tolerance))

    def rows(self) -> list[dict]:
        return [
            {"time": float(t), "measured": float(m), "bound": float(b),
             "margin": float(m - b), "pass": bool(m - b <= self.tolerance)}
            for t, m, b in zip(self.times, self.measured, self.bound)
        ]


def _central_divergence(v: np.ndarray, grid: Grid) -> np.ndarray:
    div = np.zeros(grid.shape)
    for k, h in enumerate(grid.spacing):
        div += (np.roll(v[k], -1, axis=k) - np.roll(v[k], 1, axis=k)) / (2.0 * h)
    return div


def lr_stability_check(
    rho: Trajectory, drift, r: float, backward: bool = False, coefficient: float = 10.0,
) -> StabilityReport:
    """``||rho(t)||_r <= ||rho(t0)||_r exp(int |[(r-1) div v]^-|_inf)`` along the run.

    ``drift`` is the velocity ``v`` of ``rho_t + div(v rho) = eps*Lap rho``
    given as ``drift(*coords, t)``.  With ``backward=True`` the trajectory
    solves the backward equation with drift ``b`` (so ``v = -b``) and the
    estimate runs from the final time down.
    """
    if r <= 1:
        raise ValueError(f"r must exceed 1, got {r}")
    grid = rho.grid
    if grid.topology != PERIODIC:
        raise GridError("the L^r check needs a torus")
    sign = -1.0 if backward else 1.0
    times = np.asarray(rho.times)
    order = np.arange(len(times))[::-1] if backward else np.arange(len(times))
    rates = []
    for k in order:
        v = sign * np.asarray(drift(*grid.mesh(), times[k]), dtype=float)
        v = v.reshape((grid.ndim,) + grid.shape)
        neg = np.maximum(-(r - 1.0) * _central_divergence(v, grid), 0.0)
        rates.append(float(neg.max()))
    ordered_t = times[order]
    elapsed = np.abs(ordered_t - ordered_t[0])
    integral = np.concatenate(
        ([0.0], np.cumsum(0.5 * (np.array(rates[1:]) + np.array(rates[:-1])) * np.diff(elapsed)))
    )
    start = lp_norm(rho.frames[order[0]], r)
    measured = np.array([lp_norm(rho.frames[k], r) for k in order])
    bound = start * np.exp(integral)
    tol = coefficient * max(grid.spacing)
    return StabilityReport(r, ordered_t, measured, bound, tol)
