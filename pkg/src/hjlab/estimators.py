"""Discrete one-sided second-order and gradient estimates.

Each check returns :class:`EstimateReport` rows (one per frame) comparing a
measured quantity with its theoretical bound; a row passes when
``measured - bound <= coefficient * scale * h``.
"""

from __future__ import annotations

import csv
import math
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import StructureError
from .fields import (
    ScalarField,
    Trajectory,
    discrete_gradient,
    discrete_laplacian,
    lp_norm,
    second_difference,
    trajectory_oscillation,
)
from .hamiltonians import HamiltonianSpec


@dataclass(frozen=True)
class EstimateReport:
    quantity: str
    time: float
    measured: float
    bound: float
    slack: float
    anchor: str = ""

    @property
    def margin(self) -> float:
        return self.measured - self.bound

    @property
    def passed(self) -> bool:
        return bool(self.margin <= self.slack)

    def to_dict(self) -> dict:
        return {
            "quantity": self.quantity, "time": self.time, "measured": self.measured,
            "theoretical_bound": self.bound, "margin": self.margin, "slack": self.slack,
            "anchor": self.anchor, "pass": self.passed,
        }


def all_passed(reports: Iterable[EstimateReport]) -> bool:
    return all(r.passed for r in reports)


def worst_margin(reports: Sequence[EstimateReport]) -> float:
    return max(r.margin for r in reports)


def passes_at_two_refinements(coarse: Sequence[EstimateReport],
                              fine: Sequence[EstimateReport], rel: float = 1e-9) -> bool:
    """Both levels pass and any positive margin shrinks (or stays put) under refinement."""
    if not (all_passed(coarse) and all_passed(fine)):
        return False
    c = max(worst_margin(coarse), 0.0)
    f = max(worst_margin(fine), 0.0)
    return f <= c * (1 + rel) + 1e-14


def write_estimate_csv(reports: Sequence[EstimateReport], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "measured", "bound", "margin", "pass"])
        for r in reports:
            writer.writerow([repr(r.time), repr(r.measured), repr(r.bound), repr(r.margin),
                             str(r.passed).lower()])


def _slack(field: ScalarField, coefficient: float, scale: float) -> float:
    return coefficient * scale * max(field.grid.spacing)


# -- second-order quantities -------------------------------------------------------

def default_directions(ndim: int) -> list[tuple[float, ...]]:
    if ndim == 1:
        return [(1.0,)]
    s = 1.0 / math.sqrt(2.0)
    return [(1.0, 0.0), (0.0, 1.0), (s, s), (s, -s)]


def _step_for(field: ScalarField, direction: Sequence[float], multiple: int) -> float:
    """``multiple`` times the shortest step moving a whole cell along ``direction``."""
    xi = np.asarray(direction, dtype=float)
    k = int(np.argmax(np.abs(xi) > 1e-12))
    return multiple * field.grid.spacing[k] / abs(xi[k])


def semiconcavity_constant(
    field: ScalarField,
    h_set: Sequence[float] | None = None,
    directions: Sequence[Sequence[float]] | None = None,
    interior: int = 0,
) -> float:
    """Largest second difference quotient over directions, steps and cells.

    ``h_set`` defaults to one grid step per direction (``sqrt(2)`` spacings on
    the diagonals of square 2D grids).  ``interior`` drops that many cells
    next to the boundary of bounded grids.
    """
    directions = directions or default_directions(field.grid.ndim)
    best = -math.inf
    for xi in directions:
        steps = h_set if h_set is not None else [_step_for(field, xi, 1)]
        for h in steps:
            d2 = second_difference(field, xi, h).values
            if interior and field.grid.topology != "periodic":
                d2 = d2[(slice(interior, -interior),) * field.grid.ndim]
            best = max(best, float(d2.max()))
    return best


def ssh_positive_part(field: ScalarField, p: float) -> float:
    """``L^p`` norm of the positive part of the discrete Laplacian."""
    lap = discrete_laplacian(field)
    return lp_norm(lap.like(np.maximum(lap.values, 0.0)), p)


def discrete_semiconcavity_norm(field: ScalarField, h0: float, directions=None,
                                multiples: int = 4) -> float:
    """``sup`` over ``h >= h0`` and directions of ``||(D2_{h,xi} w)^+||_{L^1}``.

    The sup is taken over the grid-representable steps ``h0, ..., multiples*h0``.
    """
    directions = directions or default_directions(field.grid.ndim)
    best = 0.0
    for xi in directions:
        base = _step_for(field, xi, 1)
        k0 = max(1, math.ceil(h0 / base - 1e-9))
        for k in range(k0, k0 + multiples):
            d2 = second_difference(field, xi, k * base)
            best = max(best, lp_norm(d2.like(np.maximum(d2.values, 0.0)), 1))
    return best


def semiconcavity_precheck(samplers: Callable[[int], ScalarField], levels: Sequence[int],
                           growth: float = 1.5) -> tuple[bool, list[float]]:
    """Whether sampled data looks semiconcave: its constant must not blow up under refinement.

    ``samplers(n)`` returns the data on the level-``n`` grid.  A kink makes the
    constant grow like ``1/h``, i.e. by the refinement ratio at every level.
    """
    constants = [semiconcavity_constant(samplers(n)) for n in levels]
    ok = all(
        c_f <= growth * max(c_c, 1e-12) or c_f <= 1e-9
        for c_c, c_f in zip(constants[:-1], constants[1:])
    )
    return ok, constants


# -- checks over trajectories --------------------------------------------------------

def _gradient_norm(field: ScalarField) -> np.ndarray:
    du = discrete_gradient(field)
    return np.sqrt(np.sum(du**2, axis=0))


def gradient_decay_check(
    traj: Trajectory, H: HamiltonianSpec, coefficient: float = 10.0, scale: float = 1.0,
) -> list[EstimateReport]:
    """``|Du(tau)|_inf <= (osc u / (C1 tau))^(1/gamma)`` per frame ``tau > 0``.

    For ``|p|^gamma/gamma`` this is ``(gamma')^(1/gamma) tau^(-1/gamma) osc^(1/gamma)``.
    """
    c = H.constants
    if c.C1 is None or c.C1t != 0.0:
        raise StructureError("gradient decay needs C1 declared and C~1 = 0")
    osc = trajectory_oscillation(traj)
    out = []
    for t, frame in zip(traj.times, traj.frames):
        if t <= 0:
            continue
        measured = float(_gradient_norm(frame).max())
        bound = (osc / (c.C1 * t)) ** (1.0 / H.gamma)
        out.append(EstimateReport("gradient sup", float(t), measured, bound,
                                  _slack(frame, coefficient, scale),
                                  "Lipschitz regularisation |Du| <= (osc/(C1 t))^(1/gamma)"))
    return out


def semiconcavity_decay_check(
    traj: Trajectory, H: HamiltonianSpec, coefficient: float = 10.0, scale: float = 1.0,
    interior: int = 0,
) -> list[EstimateReport]:
    """``u_xixi(t) <= (1/C4) t^-1 G^(2-gamma)`` with ``G`` the largest gradient up to ``t``."""
    c = H.constants
    if H.gamma > 2 or c.C4 is None or c.C4t != 0.0:
        raise StructureError("semiconcavity decay needs gamma <= 2, C4 declared and C~4 = 0")
    out = []
    G = 0.0
    for t, frame in zip(traj.times, traj.frames):
        G = max(G, float(_gradient_norm(frame).max()))
        if t <= 0:
            continue
        measured = semiconcavity_constant(frame, interior=interior)
        bound = G ** (2.0 - H.gamma) / (c.C4 * t)
        out.append(EstimateReport("semiconcavity", float(t), measured, bound,
                                  _slack(frame, coefficient, scale),
                                  "semiconcavity for positive times u_xixi <= C/t"))
    return out


def semiconcavity_preservation_check(
    traj: Trajectory, H: HamiltonianSpec, c0: float,
    cf_integral: Callable[[float], float] | None = None,
    coefficient: float = 10.0, scale: float = 1.0, interior: int = 0,
) -> list[EstimateReport]:
    """``u_xixi(tau) <= c0 + int_0^tau c_f + C~4 tau`` per frame."""
    c4t = H.constants.C4t
    if c4t is None:
        raise StructureError("semiconcavity preservation needs C~4 declared")
    out = []
    for t, frame in zip(traj.times, traj.frames):
        extra = cf_integral(float(t)) if cf_integral is not None else 0.0
        bound = c0 + extra + c4t * t
        measured = semiconcavity_constant(frame, interior=interior)
        out.append(EstimateReport("semiconcavity", float(t), measured, bound,
                                  _slack(frame, coefficient, scale),
                                  "semiconcavity preservation c0 + int c_f + C~4 tau"))
    return out


def oleinik_constant(gamma: float) -> float:
    """``1/C4`` of ``H(p) = |p|^gamma``, whose derivative is the flux of the conservation law."""
    return 1.0 / (gamma * min(1.0, gamma - 1.0))


def oleinik_check(
    U_traj: Trajectory, gamma: float, coefficient: float = 10.0, scale: float = 1.0,
) -> list[EstimateReport]:
    """``max (U_{c+1} - U_c)/h <= C/t |U|_inf^(2-gamma)`` per frame ``t > 0``."""
    C = oleinik_constant(gamma)
    grid = U_traj.grid
    h = grid.spacing[0]
    out = []
    for t, frame in zip(U_traj.times, U_traj.frames):
        if t <= 0:
            continue
        U = frame.values
        measured = float(np.max((np.roll(U, -1) - U) / h))
        bound = C / t * float(np.abs(U).max()) ** (2.0 - gamma)
        out.append(EstimateReport("one-sided Lipschitz", float(t), measured, bound,
                                  _slack(frame, coefficient, scale),
                                  "one-sided Lipschitz bound U_x <= C/t |U|^(2-gamma)"))
    return out
