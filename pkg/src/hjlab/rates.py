"""Vanishing-viscosity sweeps, error splitting and log-log order fits."""

from __future__ import annotations

import csv
import json
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .fields import ScalarField, Trajectory, discrete_gradient, lp_norm
from .forward import SolveConfig, hopf_lax_field, solve_viscous
from .hamiltonians import HamiltonianSpec

DEFAULT_EPS_LADDER = tuple(0.1 * 2.0**-k for k in range(6))
GUARD_FACTOR = 0.1


def fit_order(pairs: Sequence[tuple[float, float]]) -> float:
    """Least-squares slope of ``log(error)`` against ``log(parameter)``."""
    if len(pairs) < 3:
        raise ValueError(f"an order fit needs at least 3 pairs, got {len(pairs)}")
    x = np.array([p for p, _ in pairs], dtype=float)
    y = np.array([e for _, e in pairs], dtype=float)
    if np.any(x <= 0) or np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise ValueError("order fits need positive finite parameters and errors")
    slope, _ = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope)


@dataclass(frozen=True)
class NormSpec:
    """``L^p`` in space (of the error or of its gradient), sup over stored times."""

    p: float
    gradient: bool = False

    @property
    def key(self) -> str:
        name = "Linf" if math.isinf(self.p) else f"L{self.p:g}"
        return f"grad-{name}" if self.gradient else name


@dataclass(frozen=True)
class SplitError:
    plus: float
    minus: float
    total: float

    def component(self, name: str) -> float:
        return {"plus": self.plus, "minus": self.minus, "total": self.total}[name]


def split_error(u_eps: ScalarField, u_ref: ScalarField, p: float) -> SplitError:
    """``L^p`` norms of the positive part, negative part and whole of ``u_eps - u_ref``."""
    if u_eps.grid != u_ref.grid:
        raise ValueError("split_error needs fields on the same grid")
    d = u_eps.values - u_ref.values
    return SplitError(
        lp_norm(np.maximum(d, 0.0), p, u_eps.grid),
        lp_norm(np.maximum(-d, 0.0), p, u_eps.grid),
        lp_norm(d, p, u_eps.grid),
    )


def gradient_error(u_eps: ScalarField, u_ref: ScalarField, p: float) -> float:
    """``L^p`` norm of the pointwise length of ``D(u_eps - u_ref)``."""
    d = u_eps.like(u_eps.values - u_ref.values)
    g = discrete_gradient(d)
    return lp_norm(np.sqrt(np.sum(g**2, axis=0)), p, u_eps.grid)


def _time_sup(errors: Sequence[SplitError]) -> SplitError:
    return SplitError(
        max(e.plus for e in errors), max(e.minus for e in errors), max(e.total for e in errors)
    )


@dataclass
class RateReport:
    """Fitted convergence order of one error quantity against a parameter ladder.

    ``one_sided`` reports pass when the order is at least ``expected - tolerance``
    (and at most ``upper`` if given); otherwise ``|fitted - expected| <= tolerance``.
    """

    experiment: str
    anchor: str
    norm: NormSpec
    component: str
    pairs: list[tuple[float, float]]
    expected_order: float
    tolerance: float
    one_sided: bool = True
    upper: float | None = None
    flagged: list[float] = field(default_factory=list)
    rows: list[dict] = field(default_factory=list)
    parameter: str = "epsilon"
    hypotheses: bool = True
    notes: list[str] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.pairs = sorted((float(a), float(b)) for a, b in self.pairs)
        flagged = set(self.flagged)
        self.used = [pair for pair in self.pairs if pair[0] not in flagged]
        self.fitted_order = fit_order(self.used) if len(self.used) >= 3 else math.nan

    @property
    def passed(self) -> bool:
        fit = self.fitted_order
        if not math.isfinite(fit):
            return False
        if self.one_sided:
            ok = fit >= self.expected_order - self.tolerance
        else:
            ok = abs(fit - self.expected_order) <= self.tolerance
        if self.upper is not None:
            ok = ok and fit <= self.upper
        return bool(ok)

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "anchor": self.anchor,
            "norm": {"p": _json_float(self.norm.p), "gradient": self.norm.gradient,
                     "one_side": self.component != "total", "component": self.component},
            "parameter": self.parameter,
            "pairs": [list(pair) for pair in self.pairs],
            "flagged": list(self.flagged),
            "fitted_order": _json_float(self.fitted_order),
            "expected_order": self.expected_order,
            "tolerance": self.tolerance,
            "one_sided_rule": self.one_sided,
            "upper": self.upper,
            "within_hypotheses": self.hypotheses,
            "notes": list(self.notes),
            "pass": self.passed,
        }

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")

    def write_csv(self, path: str | Path) -> None:
        header = ["param", "error_total", "error_plus", "error_minus", "norm_p"]
        rows = self.rows or [
            {"param": a, "error_total": b, "error_plus": math.nan, "error_minus": math.nan,
             "norm_p": self.norm.p}
            for a, b in self.pairs
        ]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in sorted(rows, key=lambda r: r["param"]):
                writer.writerow([repr(float(row[k])) for k in header])

    def write_plot_data(self, path: str | Path) -> None:
        lines = [
            f"# {self.experiment} {self.norm.key} {self.component}: fitted order "
            f"{self.fitted_order:.6g}",
            f"# gnuplot: plot '{Path(path).name}' using 1:2 with linespoints",
            "# log10_param log10_error",
        ]
        lines += [f"{math.log10(a)!r} {math.log10(b)!r}" for a, b in self.pairs if b > 0]
        Path(path).write_text("\n".join(lines) + "\n")


def _json_float(x: float):
    return x if math.isfinite(x) else str(x)


# -- sweeps -------------------------------------------------------------------

Reference = Callable[[float], ScalarField]


@dataclass
class ViscosityProblem:
    """Time-dependent problem with an inviscid reference ``reference(t)``.

    ``reference_check(t)`` returns the reference recomputed at doubled
    resolution; their distance is the reference's own error estimate.
    """

    H: HamiltonianSpec
    u0: ScalarField
    T: float
    reference: Reference
    reference_check: Reference | None = None
    f: object = None
    ladder: int = 16
    cfl_safety: float = 0.4


def hopf_lax_problem(H: HamiltonianSpec, u0: ScalarField, T: float, n_grid: int = 4096,
                     **kwargs) -> ViscosityProblem:
    """Problem whose reference is the Hopf-Lax formula (doubling ``n_grid`` for the guard)."""
    cache: dict = {}

    def ref(t: float, n: int = n_grid) -> ScalarField:
        key = (round(float(t), 15), n)
        if key not in cache:
            cache[key] = hopf_lax_field(H, u0, t, n_grid=n)
        return cache[key]

    return ViscosityProblem(H, u0, T, ref, lambda t: ref(t, 2 * n_grid), **kwargs)


@dataclass
class SweepResult:
    params: list[float]
    norms: list[NormSpec]
    errors: dict[str, list[SplitError]]
    reference_error: dict[str, float]
    trajectories: dict[float, Trajectory]
    h: float

    def flagged(self, key: str, component: str = "total") -> list[float]:
        """Parameters whose error is not at least ten times the reference's own error."""
        ref = self.reference_error.get(key, 0.0)
        return [
            p for p, e in zip(self.params, self.errors[key])
            if not ref <= GUARD_FACTOR * e.component(component)
        ]

    def report(self, experiment: str, anchor: str, norm: NormSpec, component: str,
               expected: float, tolerance: float, one_sided: bool = True,
               upper: float | None = None) -> RateReport:
        errs = self.errors[norm.key]
        rows = [
            {"param": p, "error_total": e.total, "error_plus": e.plus,
             "error_minus": e.minus, "norm_p": norm.p}
            for p, e in zip(self.params, errs)
        ]
        pairs = [(p, e.component(component)) for p, e in zip(self.params, errs)]
        return RateReport(experiment, anchor, norm, component, pairs, expected, tolerance,
                          one_sided, upper, self.flagged(norm.key, component), rows)


def _check_ladder(ladder: Sequence[float], minimum: int = 5) -> list[float]:
    values = [float(e) for e in ladder]
    if len(values) < minimum:
        raise ValueError(f"the ladder needs at least {minimum} entries")
    if any(e <= 0 for e in values):
        raise ValueError("ladder entries must be positive")
    ratios = np.array(values[1:]) / np.array(values[:-1])
    if not np.allclose(ratios, ratios[0], rtol=1e-9):
        raise ValueError("the ladder must be geometric")
    return values


def vanishing_viscosity_sweep(
    problem: ViscosityProblem,
    eps_ladder: Sequence[float] = DEFAULT_EPS_LADDER,
    norms: Sequence[NormSpec] = (NormSpec(math.inf), NormSpec(1.0), NormSpec(2.0)),
) -> SweepResult:
    """Solve for every ``eps`` and record time-sup error norms against the reference."""
    ladder = _check_ladder(eps_ladder)
    norms = list(norms)
    errors: dict[str, list[SplitError]] = {n.key: [] for n in norms}
    trajectories = {}
    for eps in ladder:
        cfg = SolveConfig(epsilon=eps, T=problem.T, ladder=problem.ladder,
                          cfl_safety=problem.cfl_safety)
        traj = solve_viscous(problem.H, problem.u0, problem.f, cfg)
        trajectories[eps] = traj
        for norm in norms:
            per_time = []
            for t, frame in zip(traj.times, traj.frames):
                ref = problem.reference(t)
                if norm.gradient:
                    g = gradient_error(frame, ref, norm.p)
                    per_time.append(SplitError(math.nan, math.nan, g))
                else:
                    per_time.append(split_error(frame, ref, norm.p))
            errors[norm.key].append(_time_sup(per_time))
    reference_error = {}
    if problem.reference_check is not None:
        T = problem.T
        for norm in norms:
            a, b = problem.reference(T), problem.reference_check(T)
            reference_error[norm.key] = (
                gradient_error(a, b, norm.p) if norm.gradient else split_error(a, b, norm.p).total
            )
    h = max(problem.u0.grid.spacing)
    return SweepResult(ladder, norms, errors, reference_error, trajectories, h)


def gradient_rate(
    eps_trajs: Sequence[tuple[float, Trajectory]], reference: Reference, p: float,
    experiment: str = "gradient-rate", anchor: str = "", expected: float = 0.5,
    tolerance: float = 0.15,
) -> RateReport:
    """Fit the order of ``sup_t ||D(u_eps - u)(t)||_p`` (one-sided pass rule)."""
    pairs = []
    for eps, traj in eps_trajs:
        err = max(gradient_error(frame, reference(t), p)
                  for t, frame in zip(traj.times, traj.frames))
        pairs.append((eps, err))
    flagged = [eps for eps, err in pairs if not err > 0]
    return RateReport(experiment, anchor, NormSpec(p, gradient=True), "total", pairs,
                      expected, tolerance, True, None, flagged)


# -- stationary sweeps ------------------------------------------------------------

@dataclass(frozen=True)
class StationaryRow:
    epsilon: float
    error: float  # sup distance to the inviscid solution
    closed_form_mismatch: float  # sup distance to the known viscous solution
    h: float


def stationary_sweep(
    solve: Callable[[float], ScalarField],
    inviscid: Callable[[np.ndarray], np.ndarray],
    exact: Callable[[float, np.ndarray], np.ndarray] | None = None,
    eps_ladder: Sequence[float] = DEFAULT_EPS_LADDER,
    boundary: Callable[[float], float] | None = None,
) -> list[StationaryRow]:
    """Sup errors of stationary viscous solves against the inviscid solution.

    ``boundary(eps)`` adds the distance on the boundary, where Dirichlet data
    depending on ``eps`` make the error largest.
    """
    rows = []
    for eps in _check_ladder(eps_ladder):
        u = solve(eps)
        x = u.grid.coordinates[0]
        err = float(np.max(np.abs(u.values - inviscid(x))))
        if boundary is not None:
            err = max(err, abs(boundary(eps)))
        mismatch = float(np.max(np.abs(u.values - exact(eps, x)))) if exact else math.nan
        rows.append(StationaryRow(eps, err, mismatch, u.grid.spacing[0]))
    return rows
