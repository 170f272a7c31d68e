"""Forward solvers for ``u_t - eps*Lap u + H(Du) = f`` and companions.

* :func:`solve_viscous` -- explicit (or implicit-diffusion) monotone finite differences
* :func:`hopf_lax` -- exact inviscid solution for convex ``H`` via the Hopf-Lax formula
* :func:`solve_stationary_1d` -- Newton solver for ``-eps u'' + lam u + H(u') = f``
* :func:`conservation_law_1d` -- finite volumes for ``U_t - eps U_xx + (|U|^gamma)_x = 0``
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import solve_banded

from .errors import CFLError, ConvergenceError, GridError, SolverDivergence, StructureError
from .fields import (
    DIRICHLET,
    PERIODIC,
    Grid,
    ScalarField,
    Trajectory,
    check_finite,
    interpolate,
    pad,
)
from .hamiltonians import HamiltonianSpec, golden_max, legendre

LLF = "llf"
GODUNOV = "godunov"
EXPLICIT = "explicit"
IMPLICIT = "implicit"
ENGQUIST_OSHER = "engquist-osher"
RUSANOV = "rusanov"
ALPHA_GLOBAL = "global"
ALPHA_LOCAL = "local"

Source = Callable[..., np.ndarray] | ScalarField | None


@dataclass(frozen=True)
class SolveConfig:
    """Parameters of a time-dependent solve.

    Attributes
    ----------
    epsilon : float
        Viscosity, ``>= 0``.
    T : float
        Final time.
    cfl_safety : float
        Fraction of the stability limit used for the step.
    scheme : {"llf", "godunov"}
        Numerical Hamiltonian. The Godunov flux needs a convex 1D problem.
    diffusion_mode : {"explicit", "implicit"}
        ``implicit`` treats ``eps*Lap`` by backward Euler.
    output_times : sequence of float, optional
        Extra frame times added to the default ladder.
    ladder : int
        Number of frames of the default geometric ladder (including ``t=0``).
    gradient_bound : float, optional
        Bound of ``|Du|`` over the run, used for the speed ``L_H``.
    dt : float, optional
        Requested step; rejected if it exceeds the stability limit.
    store_every_step : bool
        Keep every time step as a frame (needed for exact adjoint pairings).
    alpha_margin : float
        Factor applied to the local speed bound in the Lax-Friedrichs term.
    alpha_mode : {"global", "local"}
        Lax-Friedrichs speed frozen per step over the grid, or per cell.
    """

    epsilon: float = 0.0
    T: float = 1.0
    cfl_safety: float = 0.4
    scheme: str = LLF
    diffusion_mode: str = EXPLICIT
    output_times: tuple[float, ...] = ()
    ladder: int = 16
    gradient_bound: float | None = None
    dt: float | None = None
    store_every_step: bool = False
    alpha_margin: float = 1.1
    alpha_mode: str = ALPHA_GLOBAL

    def __post_init__(self) -> None:
        if not (self.epsilon >= 0 and math.isfinite(self.epsilon)):
            raise ValueError(f"epsilon must be finite and >= 0, got {self.epsilon}")
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError(f"cfl_safety must lie in (0, 1], got {self.cfl_safety}")
        if self.scheme not in (LLF, GODUNOV):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.diffusion_mode not in (EXPLICIT, IMPLICIT):
            raise ValueError(f"unknown diffusion mode {self.diffusion_mode!r}")
        if self.alpha_margin < 1:
            raise ValueError("alpha_margin below 1 breaks monotonicity")
        if self.alpha_mode not in (ALPHA_GLOBAL, ALPHA_LOCAL):
            raise ValueError(f"unknown alpha mode {self.alpha_mode!r}")
        object.__setattr__(self, "output_times", tuple(float(t) for t in self.output_times))


def output_ladder(T: float, count: int = 16, extra: Sequence[float] = ()) -> np.ndarray:
    """``0`` plus a geometric ladder ``T*2^(-j/2)`` and any extra times in ``[0, T]``."""
    times = {0.0, float(T)}
    times.update(float(T) * 2.0 ** (-j / 2.0) for j in range(max(count - 1, 1)))
    for t in extra:
        if not 0 <= t <= T:
            raise ValueError(f"output time {t} outside [0, {T}]")
        times.add(float(t))
    return np.array(sorted(times))


# -- building blocks ----------------------------------------------------------

def pad_all(u: np.ndarray, grid: Grid) -> np.ndarray:
    """One ghost layer on every side (corners are never read)."""
    if grid.ndim == 1 and grid.topology == PERIODIC:
        return np.concatenate((u[-1:], u, u[:1]))
    out = u
    for axis in range(grid.ndim):
        out = pad(out, grid, axis, 1)
    return out


def one_sided(u: np.ndarray, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Backward and forward differences, each of shape ``(ndim, *shape)``."""
    P = pad_all(u, grid)
    if grid.ndim == 1:
        h = grid.spacing[0]
        d = np.diff(P) / h
        return d[None, :-1], d[None, 1:]
    hx, hy = grid.spacing
    c = P[1:-1, 1:-1]
    back = np.stack(((c - P[:-2, 1:-1]) / hx, (c - P[1:-1, :-2]) / hy))
    fwd = np.stack(((P[2:, 1:-1] - c) / hx, (P[1:-1, 2:] - c) / hy))
    return back, fwd


def source_values(f: Source, grid: Grid, t: float) -> np.ndarray | float:
    if f is None:
        return 0.0
    if isinstance(f, ScalarField):
        return f.values
    return np.broadcast_to(np.asarray(f(*grid.mesh(), t), dtype=float), grid.shape)


def _lipschitz(u: np.ndarray, grid: Grid) -> float:
    back, fwd = one_sided(u, grid)
    return float(max(np.abs(back).max(), np.abs(fwd).max()))


@dataclass(frozen=True)
class StepCoefficients:
    """Per-step quantities of the Lax-Friedrichs update, reused by the adjoint."""

    back: np.ndarray
    fwd: np.ndarray
    central: np.ndarray
    alpha: np.ndarray
    diffusion: np.ndarray  # explicit diffusion coefficient per axis and cell


class LaxFriedrichs:
    """Lax-Friedrichs numerical Hamiltonian with viscosity folded in.

    The update is ``u + dt*(-H(p_c) + sum_k D_k Lap_k u + f)`` with
    ``D_k = eps + max(0, alpha_k - 2 eps / h_k) h_k / 2``: physical viscosity
    already supplies the dissipation monotonicity requires, so numerical
    diffusion is only added where it falls short.

    With ``alpha_mode="global"`` the speed ``alpha_k`` is frozen per step as
    the maximum over the grid, so ``D_k`` is constant in space and the scheme
    preserves semiconcavity.  ``"local"`` uses cellwise speeds; it is less
    diffusive but a ``D`` varying on the grid scale can raise second
    differences where ``|Du|`` has a minimum.
    """

    def __init__(self, H: HamiltonianSpec, grid: Grid, epsilon: float,
                 alpha_margin: float = 1.1, implicit: bool = False,
                 alpha_mode: str = ALPHA_GLOBAL):
        if alpha_mode not in (ALPHA_GLOBAL, ALPHA_LOCAL):
            raise ValueError(f"unknown alpha mode {alpha_mode!r}")
        self.alpha_mode = alpha_mode
        self.H = H
        self.grid = grid
        self.epsilon = float(epsilon)
        self.alpha_margin = alpha_margin
        self.implicit = implicit
        self.h = np.asarray(grid.spacing)

    def local_speed(self, back: np.ndarray, fwd: np.ndarray) -> np.ndarray:
        """Bound of ``|dH/dp_k|`` over the box spanned by each cell's one-sided gradients."""
        profile = self.H.profile
        if profile is not None and profile.monotone_speed:
            if back.shape[0] == 1:
                r = np.maximum(np.abs(back[0]), np.abs(fwd[0]))
            else:
                r = np.sqrt(np.sum(np.maximum(np.abs(back), np.abs(fwd)) ** 2, axis=0))
            return np.broadcast_to(profile.dphi(r), back.shape)
        axes = tuple(range(1, back.ndim))
        lo = np.minimum(back.min(axis=axes), fwd.min(axis=axes))
        hi = np.maximum(back.max(axis=axes), fwd.max(axis=axes))
        speed = self.H.speed_bound(lo, hi)
        return np.broadcast_to(speed.reshape((-1,) + (1,) * len(axes)), back.shape)

    def coefficients(self, u: np.ndarray) -> StepCoefficients:
        back, fwd = one_sided(u, self.grid)
        alpha = self.alpha_margin * self.local_speed(back, fwd)
        if self.alpha_mode == ALPHA_GLOBAL:
            axes = tuple(range(1, alpha.ndim))
            alpha = np.broadcast_to(alpha.max(axis=axes, keepdims=True), alpha.shape)
        h = self.h.reshape((-1,) + (1,) * self.grid.ndim)
        if self.implicit:
            diffusion = alpha * h / 2.0
        else:
            diffusion = self.epsilon + np.maximum(alpha - 2.0 * self.epsilon / h, 0.0) * h / 2.0
        return StepCoefficients(back, fwd, 0.5 * (back + fwd), alpha, diffusion)

    def rate(self, u: np.ndarray, f) -> tuple[np.ndarray, StepCoefficients]:
        c = self.coefficients(u)
        out = -self.H.evaluate(c.central)
        for k in range(self.grid.ndim):
            out = out + c.diffusion[k] * (c.fwd[k] - c.back[k]) / self.h[k]
        return out + f, c

    def step_limit(self, c: StepCoefficients) -> float:
        """Largest step keeping every stencil coefficient nonnegative."""
        h = self.h.reshape((-1,) + (1,) * self.grid.ndim)
        explicit = float(np.max(np.sum(2.0 * c.diffusion / h**2, axis=0)))
        return 1.0 / explicit if explicit > 0 else math.inf


class GodunovFlux1D:
    """Godunov numerical Hamiltonian for convex ``H`` minimal at ``p = 0`` (1D)."""

    def __init__(self, H: HamiltonianSpec, grid: Grid, epsilon: float):
        if grid.ndim != 1 or not H.convex:
            raise StructureError("the Godunov flux is offered for convex 1D problems only")
        self.H = H
        self.grid = grid
        self.epsilon = float(epsilon)
        self.h = grid.spacing[0]

    def rate(self, u: np.ndarray, f):
        back, fwd = one_sided(u, self.grid)
        flux = np.maximum(
            self.H.evaluate(np.maximum(back, 0.0)), self.H.evaluate(np.minimum(fwd, 0.0))
        )
        out = -flux + self.epsilon * (fwd[0] - back[0]) / self.h
        return out + f, None


class ImplicitDiffusion:
    """Backward-Euler solve of ``(I - dt*eps*Lap) v = w``, one axis at a time."""

    def __init__(self, grid: Grid, epsilon: float):
        self.grid = grid
        self.epsilon = epsilon
        self._cache: dict = {}

    def _axis_solve(self, w: np.ndarray, axis: int, dt: float) -> np.ndarray:
        grid = self.grid
        n = grid.cells[axis]
        mu = dt * self.epsilon / grid.spacing[axis] ** 2
        if grid.topology == PERIODIC:
            k = np.arange(n // 2 + 1)
            symbol = 1.0 + 4.0 * mu * np.sin(np.pi * k / n) ** 2
            shape = [1] * w.ndim
            shape[axis] = -1
            spec = np.fft.rfft(w, axis=axis) / symbol.reshape(shape)
            return np.fft.irfft(spec, n=n, axis=axis)
        ab = np.zeros((3, n))
        ab[0, 1:] = -mu
        ab[1, :] = 1.0 + 2.0 * mu
        ab[2, :-1] = -mu
        rhs = np.moveaxis(w, axis, 0).copy()
        if grid.boundary == DIRICHLET:
            # ghost = 2g - u_0
            left, right = grid.trace[axis]
            ab[1, 0] += mu
            ab[1, -1] += mu
            rhs[0] += 2.0 * mu * left
            rhs[-1] += 2.0 * mu * right
        else:
            # linear extrapolation makes the boundary Laplacian vanish
            ab[1, 0] = ab[1, -1] = 1.0
            ab[0, 1] = 0.0
            ab[2, -2] = 0.0
        out = solve_banded((1, 1), ab, rhs.reshape(n, -1)).reshape(rhs.shape)
        return np.moveaxis(out, 0, axis)

    def __call__(self, w: np.ndarray, dt: float) -> np.ndarray:
        if self.epsilon == 0:
            return w
        for axis in range(self.grid.ndim):
            w = self._axis_solve(w, axis, dt)
        return w


def speed_bound(H: HamiltonianSpec, grid: Grid, gradient_bound: float) -> float:
    G = float(gradient_bound)
    return float(np.max(H.speed_bound(np.full(grid.ndim, -G), np.full(grid.ndim, G))))


def stable_step(H: HamiltonianSpec, grid: Grid, cfg: SolveConfig, gradient_bound: float) -> float:
    """Step satisfying ``dt <= cfl*h/L_H`` and, for explicit diffusion, ``dt <= cfl*h^2/(2n eps)``."""
    L = speed_bound(H, grid, gradient_bound)
    h = np.asarray(grid.spacing)
    rate = np.sum(cfg.alpha_margin * L / h)
    if cfg.diffusion_mode == EXPLICIT:
        rate += np.sum(2.0 * cfg.epsilon / h**2)
    return cfg.cfl_safety / rate if rate > 0 else cfg.T


def _gradient_bound(u0: ScalarField, f: Source, cfg: SolveConfig) -> float:
    if cfg.gradient_bound is not None:
        return float(cfg.gradient_bound)
    G = _lipschitz(u0.values, u0.grid)
    if f is not None:
        grid = u0.grid
        df = max(
            _lipschitz(np.asarray(source_values(f, grid, t)) * np.ones(grid.shape), grid)
            for t in np.linspace(0.0, cfg.T, 9)
        )
        G += cfg.T * df
    return G


def solve_viscous(
    H: HamiltonianSpec, u0: ScalarField, f: Source = None, cfg: SolveConfig | None = None,
) -> Trajectory:
    """Integrate ``u_t - eps*Lap u + H(Du) = f`` from ``u0`` up to ``cfg.T``.

    Returns a trajectory with frames at the output ladder (or every step).
    ``trajectory.meta`` records the step sizes, the scheme and the source so
    that the adjoint solver can replay the exact discrete operator.
    """
    cfg = cfg or SolveConfig()
    grid = u0.grid
    check_finite(u0.values, "initial data")
    G = _gradient_bound(u0, f, cfg)
    dt_max = stable_step(H, grid, cfg, G)
    if cfg.dt is not None:
        if cfg.dt > dt_max * (1 + 1e-12):
            raise CFLError(f"requested dt={cfg.dt:.3e} exceeds the stable step {dt_max:.3e}")
        dt_max = cfg.dt
    implicit = cfg.diffusion_mode == IMPLICIT
    if cfg.scheme == LLF:
        op = LaxFriedrichs(H, grid, cfg.epsilon, cfg.alpha_margin, implicit, cfg.alpha_mode)
    else:
        op = GodunovFlux1D(H, grid, 0.0 if implicit else cfg.epsilon)
    diffuse = ImplicitDiffusion(grid, cfg.epsilon) if implicit else None

    targets = output_ladder(cfg.T, cfg.ladder, cfg.output_times)
    u = u0.values.astype(float).copy()
    frames = [ScalarField(grid, u, 0.0)]
    times = [0.0]
    steps: list[float] = []
    substeps: list[int] = []
    t = 0.0
    for t_next in targets[1:]:
        n_sub = max(1, math.ceil((t_next - t) / dt_max * (1 - 1e-12)))
        dt = (t_next - t) / n_sub
        substeps.extend([1] * n_sub if cfg.store_every_step else [n_sub])
        for j in range(n_sub):
            t_now = t + j * dt
            rhs, coeffs = op.rate(u, source_values(f, grid, t_now))
            if coeffs is not None and dt > op.step_limit(coeffs) * (1 + 1e-9):
                raise CFLError(
                    f"gradients left the range used for the step at t={t_now:.4g}; "
                    "raise gradient_bound",
                )
            u = u + dt * rhs
            if diffuse is not None:
                u = diffuse(u, dt)
            steps.append(dt)
            if not np.all(np.isfinite(u)):
                raise SolverDivergence(f"non-finite values at t={t_now + dt:.6g}", frames[-1])
            if cfg.store_every_step and j < n_sub - 1:
                times.append(t_now + dt)
                frames.append(ScalarField(grid, u, t_now + dt))
        t = float(t_next)
        times.append(t)
        frames.append(ScalarField(grid, u, t))
    meta = {
        "hamiltonian": H,
        "epsilon": cfg.epsilon,
        "source": f,
        "scheme": cfg.scheme,
        "diffusion_mode": cfg.diffusion_mode,
        "alpha_margin": cfg.alpha_margin,
        "alpha_mode": cfg.alpha_mode,
        "steps": np.array(steps),
        "substeps": substeps,
        "every_step": cfg.store_every_step,
        "gradient_bound": G,
    }
    return Trajectory(grid, times, frames, meta)


def solve_inviscid(H: HamiltonianSpec, u0: ScalarField, f: Source = None,
                   cfg: SolveConfig | None = None) -> Trajectory:
    cfg = replace(cfg or SolveConfig(), epsilon=0.0)
    return solve_viscous(H, u0, f, cfg)


# -- Hopf-Lax oracle -----------------------------------------------------------

def _initial_sampler(u0, grid_hint: Grid | None):
    if isinstance(u0, ScalarField):
        if u0.grid.ndim != 1:
            raise GridError("hopf_lax evaluates 1D data; use hopf_lax_separable_2d in 2D")
        g = u0.grid
        return (lambda y: interpolate(g, u0.values, [y])), g
    return u0, grid_hint


def hopf_lax(
    H: HamiltonianSpec,
    u0,
    x,
    t: float,
    *,
    box: tuple[float, float] | None = None,
    lipschitz: float | None = None,
    n_grid: int = 4096,
    candidates: int = 3,
    tol: float = 1e-8,
    chunk: int = 256,
) -> np.ndarray:
    """``inf_y { u0(y) + t*L((x - y)/t) }`` for 1D convex ``H``.

    Parameters
    ----------
    u0 : callable or ScalarField
        Initial data; a periodic field is extended periodically.
    x : float or array
        Evaluation points.
    box : (float, float), optional
        Admissible ``y`` interval. Defaults to the field's extent for bounded
        grids and to the whole line otherwise.
    lipschitz : float, optional
        Bound of ``|u0'|``; limits the search to ``|x - y| <= t*H'(lipschitz)``.
        Required for callables without a box.
    """
    if not t > 0:
        raise ValueError(f"hopf_lax needs t > 0, got {t}")
    if not H.legendre_available:
        raise StructureError(f"{H.id} has no usable conjugate for the Hopf-Lax formula")
    func, g = _initial_sampler(u0, None)
    if isinstance(u0, ScalarField):
        if lipschitz is None:
            lipschitz = _lipschitz(u0.values, g)
        if box is None and g.topology != PERIODIC:
            box = (g.lower[0], g.upper[0])
    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1)
    if lipschitz is not None:
        radius = t * float(H.speed_bound([-lipschitz], [lipschitz])[0]) * 1.01 + 1e-9
    elif box is None:
        raise ValueError("hopf_lax needs a box or a Lipschitz bound")
    else:
        radius = None
    out = np.empty(flat.size)
    s = np.linspace(0.0, 1.0, n_grid)
    for start in range(0, flat.size, chunk):
        xs = flat[start:start + chunk][:, None]
        if radius is not None:
            lo, hi = xs - radius, xs + radius
            if box is not None:
                lo, hi = np.maximum(lo, box[0]), np.minimum(hi, box[1])
        else:
            lo, hi = np.full_like(xs, box[0]), np.full_like(xs, box[1])
        y = lo + (hi - lo) * s[None]

        def objective(yy, xx):
            return func(yy) + t * legendre(H, ((xx - yy) / t)[None], q_max=np.inf)

        vals = objective(y, xs)
        best = vals.min(axis=1)
        # refine the lowest local minima of the sampled objective
        interior = np.full(vals.shape, False)
        interior[:, 1:-1] = (vals[:, 1:-1] <= vals[:, :-2]) & (vals[:, 1:-1] <= vals[:, 2:])
        interior[:, 0] = vals[:, 0] <= vals[:, 1]
        interior[:, -1] = vals[:, -1] <= vals[:, -2]
        ranked = np.where(interior, vals, np.inf)
        order = np.argsort(ranked, axis=1, kind="stable")[:, :candidates]
        dy = (hi - lo) / (n_grid - 1)
        rows = np.arange(xs.shape[0])[:, None]
        for k in range(order.shape[1]):
            idx = order[:, k:k + 1]
            ok = np.isfinite(ranked[rows, idx])
            centre = y[rows, idx]
            a = np.maximum(centre - dy, lo)
            b = np.minimum(centre + dy, hi)
            _, neg = golden_max(lambda yy: -objective(yy, xs), a, b, tol=tol)
            best = np.minimum(best, np.where(ok[:, 0], -neg[:, 0], np.inf))
        out[start:start + xs.shape[0]] = best
    return out.reshape(x.shape)


def hopf_lax_field(H: HamiltonianSpec, u0: ScalarField, t: float, **kwargs) -> ScalarField:
    if t == 0:
        return u0.like(u0.values, 0.0)
    return ScalarField(u0.grid, hopf_lax(H, u0, u0.grid.coordinates[0], t, **kwargs), t)


def hopf_lax_separable_2d(
    H: HamiltonianSpec, g1, g2, grid: Grid, t: float, **kwargs,
) -> ScalarField:
    """Exact solution for ``u0 = g1(x) + g2(y)`` when the conjugate splits by axis.

    Only the quadratic power law has a conjugate that is a sum over axes.
    """
    if H.legendre_closed_form is None or not math.isclose(H.gamma, 2.0):
        raise StructureError("the separable formula needs |p|^2/2")
    if grid.ndim != 2:
        raise GridError("hopf_lax_separable_2d needs a 2D grid")
    if t == 0:
        X, Y = grid.mesh()
        return ScalarField(grid, g1(X) + g2(Y), 0.0)
    x, y = grid.coordinates
    ux = hopf_lax(H, g1, x, t, **kwargs)
    uy = hopf_lax(H, g2, y, t, **kwargs)
    return ScalarField(grid, ux[:, None] + uy[None, :], t)


# -- stationary problems ---------------------------------------------------------

def _smoothed(H: HamiltonianSpec, delta: float):
    """Derivative of ``H`` with the eikonal kink replaced by ``sqrt(p^2 + delta^2)``."""
    if not H.coercive and H.gamma == 1.0:
        return lambda p: p / np.sqrt(p * p + delta * delta)
    return lambda p: H.gradient(p[None])[0]


def solve_stationary_1d(
    H: HamiltonianSpec,
    epsilon: float,
    lam: float,
    f: ScalarField,
    dirichlet: tuple[float, float] | None = None,
    *,
    initial: np.ndarray | None = None,
    tol: float = 1e-10,
    max_iter: int = 200,
    delta: float = 1e-8,
) -> ScalarField:
    """Damped Newton for ``-eps u'' + lam u + H(u') = f`` with central differences.

    ``f`` lives on a bounded 1D grid of cell centres; the Dirichlet data are
    imposed on the faces through odd-reflection ghosts.
    """
    if not epsilon > 0:
        raise ValueError("the stationary solver needs epsilon > 0")
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    grid = f.grid
    if grid.ndim != 1 or grid.topology == PERIODIC:
        raise GridError("solve_stationary_1d works on a bounded 1D grid")
    if dirichlet is None:
        if grid.boundary != DIRICHLET:
            if lam == 0:
                raise ValueError("lam = 0 needs Dirichlet data")
            raise ValueError("pass Dirichlet data or a grid carrying a trace")
        dirichlet = grid.trace[0]
    gl, gr = map(float, dirichlet)
    h = grid.spacing[0]
    n = grid.cells[0]
    fv = f.values
    dH = _smoothed(H, delta)

    def residual(u):
        P = np.concatenate(([2 * gl - u[0]], u, [2 * gr - u[-1]]))
        p = (P[2:] - P[:-2]) / (2 * h)
        lap = (P[2:] - 2 * u + P[:-2]) / h**2
        return -epsilon * lap + lam * u + H.evaluate(p[None]) - fv, p

    if initial is None:
        x = (grid.coordinates[0] - grid.lower[0]) / grid.extent[0]
        u = gl + (gr - gl) * x
    else:
        u = np.asarray(initial, dtype=float).copy()
    r, p = residual(u)
    norm = float(np.max(np.abs(r)))
    history = [norm]
    for it in range(max_iter):
        if norm < tol:
            return ScalarField(grid, u, 0.0)
        d = dH(p) / (2 * h)
        diag = np.full(n, 2 * epsilon / h**2 + lam)
        upper = np.full(n - 1, -epsilon / h**2) + d[:-1]
        lower = np.full(n - 1, -epsilon / h**2) - d[1:]
        # odd-reflection ghosts fold into the boundary rows
        diag[0] += epsilon / h**2 + d[0]
        diag[-1] += epsilon / h**2 - d[-1]
        ab = np.zeros((3, n))
        ab[0, 1:] = upper
        ab[1] = diag
        ab[2, :-1] = lower
        step = solve_banded((1, 1), ab, -r)
        theta = 1.0
        while theta > 1e-6:
            trial = u + theta * step
            r_new, p_new = residual(trial)
            new = float(np.max(np.abs(r_new)))
            if new < norm * (1 - 1e-4 * theta) or new < tol:
                break
            theta *= 0.5
        u, r, p, norm = trial, r_new, p_new, new
        history.append(norm)
    if norm < tol:
        return ScalarField(grid, u, 0.0)
    raise ConvergenceError(
        f"Newton stalled after {max_iter} iterations (residual {norm:.3e})",
        {"residual": norm, "history": history},
    )


def stationary_richardson(
    H: HamiltonianSpec, epsilon: float, lam: float, f_func, lower: float, upper: float,
    cells: int, dirichlet: tuple[float, float], ratio: int = 3,
) -> ScalarField:
    """Stationary solve on ``cells`` and ``ratio*cells`` combined by Richardson extrapolation.

    With an odd ``ratio`` every coarse cell centre is a fine cell centre, so
    ``(ratio^2 u_fine - u_coarse) / (ratio^2 - 1)`` cancels the ``h^2`` term.
    """
    if ratio % 2 == 0:
        raise ValueError("the refinement ratio must be odd so cell centres nest")
    coarse_grid = Grid.box(lower, upper, cells, DIRICHLET, [dirichlet])
    fine_grid = coarse_grid.refine(ratio)
    coarse = solve_stationary_1d(H, epsilon, lam, ScalarField.from_function(coarse_grid, f_func),
                                 dirichlet)
    guess = np.repeat(coarse.values, ratio)
    fine = solve_stationary_1d(H, epsilon, lam, ScalarField.from_function(fine_grid, f_func),
                               dirichlet, initial=guess)
    sampled = fine.values[ratio // 2::ratio]
    r2 = ratio * ratio
    return ScalarField(coarse_grid, (r2 * sampled - coarse.values) / (r2 - 1.0), 0.0)


# -- conservation law companion -------------------------------------------------

@dataclass(frozen=True)
class ConservationLawConfig:
    flux: str = GODUNOV  # or "engquist-osher", "rusanov"
    cfl_safety: float = 0.4
    ladder: int = 16
    output_times: tuple[float, ...] = field(default=())


def conservation_law_1d(
    gamma: float, epsilon: float, U0: ScalarField, T: float,
    cfg: ConservationLawConfig | None = None, dt: float | None = None,
) -> Trajectory:
    """Finite volumes for ``U_t - eps U_xx + (|U|^gamma)_x = 0`` on a periodic 1D grid.

    ``godunov`` and ``engquist-osher`` are the sharpest monotone fluxes, but both
    vanish across a sonic point, where the one-cell difference quotient then
    decays at the wrong rate.  ``rusanov`` adds the constant dissipation
    ``a h/2`` (``a`` frozen per step) and keeps one-sided bounds intact.
    """
    cfg = cfg or ConservationLawConfig()
    grid = U0.grid
    if grid.ndim != 1 or grid.topology != PERIODIC:
        raise GridError("conservation_law_1d needs a periodic 1D grid")
    if gamma <= 1:
        raise ValueError("gamma must exceed 1")
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    h = grid.spacing[0]
    U = U0.values.astype(float).copy()
    umax = float(np.abs(U).max())
    speed = (1.1 if cfg.flux == RUSANOV else 1.0) * gamma * umax ** (gamma - 1.0)
    rate = speed / h + 2.0 * epsilon / h**2
    dt_max = cfg.cfl_safety / rate if rate > 0 else T
    if dt is not None:
        if dt > dt_max * (1 + 1e-12):
            raise CFLError(f"requested dt={dt:.3e} exceeds the stable step {dt_max:.3e}")
        dt_max = dt

    def F(v):
        return np.abs(v) ** gamma

    def numerical_flux(left, right):
        if cfg.flux == GODUNOV:
            return np.maximum(F(np.maximum(left, 0.0)), F(np.minimum(right, 0.0)))
        if cfg.flux == ENGQUIST_OSHER:
            return F(np.maximum(left, 0.0)) + F(np.minimum(right, 0.0))
        # Rusanov with the speed frozen per step: a constant numerical viscosity
        a = 1.1 * gamma * float(np.abs(left).max()) ** (gamma - 1.0)
        return 0.5 * (F(left) + F(right)) - 0.5 * a * (right - left)

    if cfg.flux not in (GODUNOV, ENGQUIST_OSHER, RUSANOV):
        raise ValueError(f"unknown flux {cfg.flux!r}")
    targets = output_ladder(T, cfg.ladder, cfg.output_times)
    frames = [ScalarField(grid, U, 0.0)]
    t = 0.0
    for t_next in targets[1:]:
        n_sub = max(1, math.ceil((t_next - t) / dt_max * (1 - 1e-12)))
        step = (t_next - t) / n_sub
        for _ in range(n_sub):
            right = np.roll(U, -1)
            # flux through the face i+1/2
            face = numerical_flux(U, right) - epsilon * (right - U) / h
            U = U - step / h * (face - np.roll(face, 1))
        if not np.all(np.isfinite(U)):
            raise SolverDivergence(f"non-finite values before t={t_next:.6g}", frames[-1])
        t = float(t_next)
        frames.append(ScalarField(grid, U, t))
    return Trajectory(grid, targets, frames, {"gamma": gamma, "epsilon": epsilon})
