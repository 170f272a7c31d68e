"""Uniform grids, sampled scalar fields and the finite-difference operators on them.

Periodic grids sample the nodes ``lower + i*h`` of the period cell; bounded
grids sample cell centres ``lower + (i + 1/2)*h``.  Bounded grids close their
stencils with ghost values produced by the attached boundary rule: odd
reflection about the face for a Dirichlet trace, or linear extrapolation.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DiagnosticsError, GridError

PERIODIC = "periodic"
BOUNDED = "bounded"
EXTRAPOLATE = "extrapolate"
DIRICHLET = "dirichlet"


def _as_tuple(value, ndim: int | None = None, cast=float) -> tuple:
    if np.ndim(value) == 0:
        value = [value] * (ndim or 1)
    return tuple(cast(v) for v in value)


@dataclass(frozen=True)
class Grid:
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    cells: tuple[int, ...]
    topology: str = PERIODIC
    boundary: str | None = None
    trace: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self) -> None:
        cells = _as_tuple(self.cells, cast=int)
        ndim = len(cells)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "lower", _as_tuple(self.lower, ndim))
        object.__setattr__(self, "upper", _as_tuple(self.upper, ndim))
        if ndim not in (1, 2):
            raise GridError(f"only 1D and 2D grids are supported, got {ndim}D")
        if len(self.lower) != ndim or len(self.upper) != ndim:
            raise GridError("lower/upper/cells must have one entry per axis")
        if any(n < 4 for n in cells):
            raise GridError(f"need at least 4 cells per axis, got {cells}")
        if any(hi <= lo for lo, hi in zip(self.lower, self.upper)):
            raise GridError("upper bound must exceed lower bound on every axis")
        if self.topology not in (PERIODIC, BOUNDED):
            raise GridError(f"unknown topology {self.topology!r}")
        if self.topology == PERIODIC:
            object.__setattr__(self, "boundary", None)
            object.__setattr__(self, "trace", None)
            return
        boundary = self.boundary or EXTRAPOLATE
        if boundary not in (EXTRAPOLATE, DIRICHLET):
            raise GridError(f"unknown boundary rule {boundary!r}")
        object.__setattr__(self, "boundary", boundary)
        if boundary == DIRICHLET:
            if self.trace is None:
                raise GridError("a Dirichlet boundary needs a trace per axis")
            trace = tuple((float(a), float(b)) for a, b in np.reshape(self.trace, (ndim, 2)))
            object.__setattr__(self, "trace", trace)
        else:
            object.__setattr__(self, "trace", None)

    @classmethod
    def periodic(cls, lower, upper, cells) -> Grid:
        return cls(lower, upper, cells, PERIODIC)

    @classmethod
    def box(cls, lower, upper, cells, boundary: str = EXTRAPOLATE, trace=None) -> Grid:
        return cls(lower, upper, cells, BOUNDED, boundary, trace)

    @property
    def ndim(self) -> int:
        return len(self.cells)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells

    @property
    def size(self) -> int:
        return int(np.prod(self.cells))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((hi - lo) / n for lo, hi, n in zip(self.lower, self.upper, self.cells))

    @property
    def extent(self) -> tuple[float, ...]:
        return tuple(hi - lo for lo, hi in zip(self.lower, self.upper))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod(self.extent))

    @property
    def periodic_axes(self) -> bool:
        return self.topology == PERIODIC

    @property
    def coordinates(self) -> tuple[np.ndarray, ...]:
        offset = 0.0 if self.topology == PERIODIC else 0.5
        return tuple(
            lo + (np.arange(n) + offset) * h
            for lo, n, h in zip(self.lower, self.cells, self.spacing)
        )

    def mesh(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.coordinates, indexing="ij"))

    def refine(self, factor: int) -> Grid:
        return Grid(
            self.lower, self.upper, tuple(n * factor for n in self.cells),
            self.topology, self.boundary, self.trace,
        )

    def to_dict(self) -> dict:
        return {
            "lower": list(self.lower),
            "upper": list(self.upper),
            "cells": list(self.cells),
            "topology": self.topology,
            "boundary": self.boundary,
            "trace": [list(t) for t in self.trace] if self.trace else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> Grid:
        return cls(
            tuple(data["lower"]), tuple(data["upper"]), tuple(data["cells"]),
            data.get("topology", PERIODIC), data.get("boundary"), data.get("trace"),
        )


def check_finite(values: np.ndarray, what: str = "field") -> None:
    if not np.all(np.isfinite(values)):
        bad = int(np.size(values) - np.count_nonzero(np.isfinite(values)))
        raise DiagnosticsError(f"{what} contains {bad} non-finite value(s)")


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise GridError(f"values have shape {values.shape}, grid expects {self.grid.shape}")
        check_finite(values)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "time", float(self.time))

    @classmethod
    def from_function(cls, grid: Grid, func, time: float = 0.0) -> ScalarField:
        return cls(grid, np.broadcast_to(func(*grid.mesh()), grid.shape), time)

    def like(self, values: np.ndarray, time: float | None = None) -> ScalarField:
        return ScalarField(self.grid, values, self.time if time is None else time)

    def sample(self, *points) -> np.ndarray:
        """Multilinear interpolation at arbitrary points (one array per axis)."""
        return interpolate(self.grid, self.values, points)


@dataclass(frozen=True, eq=False)
class Trajectory:
    grid: Grid
    times: np.ndarray
    frames: tuple[ScalarField, ...]
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        frames = tuple(self.frames)
        if len(times) != len(frames) or len(frames) == 0:
            raise GridError("a trajectory needs one frame per time and at least one frame")
        if np.any(np.diff(times) <= 0):
            raise GridError("trajectory times must be strictly increasing")
        for t, frame in zip(times, frames):
            if frame.grid != self.grid:
                raise GridError("every frame must live on the trajectory grid")
            if not math.isclose(frame.time, t, rel_tol=1e-12, abs_tol=1e-14):
                raise GridError(f"frame tagged t={frame.time} stored at t={t}")
        times.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "frames", frames)

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def final(self) -> ScalarField:
        return self.frames[-1]

    def stacked(self) -> np.ndarray:
        return np.stack([f.values for f in self.frames])

    def index_of(self, t: float, tol: float = 1e-10) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > tol * max(1.0, abs(t)):
            raise GridError(f"t={t} is not a frame time")
        return k

    def at(self, t: float) -> ScalarField:
        return self.frames[self.index_of(t)]

    def interpolate_time(self, t: float) -> np.ndarray:
        """Values at time ``t`` by linear interpolation between stored frames."""
        times = self.times
        if t <= times[0]:
            return self.frames[0].values
        if t >= times[-1]:
            return self.frames[-1].values
        k = int(np.searchsorted(times, t)) - 1
        w = (t - times[k]) / (times[k + 1] - times[k])
        return (1.0 - w) * self.frames[k].values + w * self.frames[k + 1].values


# -- boundary handling -------------------------------------------------------

def pad(values: np.ndarray, grid: Grid, axis: int, width: int) -> np.ndarray:
    """Append ``width`` ghost layers on both sides of ``axis``."""
    if width == 0:
        return values
    n = values.shape[axis]
    if grid.topology == PERIODIC:
        idx = np.arange(-width, n + width) % n
        return np.take(values, idx, axis=axis)
    if width > n:
        raise GridError(f"stencil of half-width {width} exceeds {n} cells")
    inner = np.moveaxis(values, axis, 0)
    j = np.arange(1, width + 1).reshape((-1,) + (1,) * (inner.ndim - 1))
    if grid.boundary == DIRICHLET:
        left_g, right_g = grid.trace[axis]
        left = 2.0 * left_g - inner[:width]
        right = 2.0 * right_g - inner[::-1][:width]
    else:
        left = inner[0] - j * (inner[1] - inner[0])
        right = inner[-1] + j * (inner[-1] - inner[-2])
    out = np.concatenate([left[::-1], inner, right], axis=0)
    return np.moveaxis(out, 0, axis)


def shifted(values: np.ndarray, grid: Grid, offsets: Sequence[int]) -> np.ndarray:
    """``values`` evaluated at index + offsets, with ghost values outside the grid."""
    out = values
    for axis, k in enumerate(offsets):
        if k == 0:
            continue
        w = abs(k)
        padded = pad(out, grid, axis, w)
        n = values.shape[axis]
        out = np.take(padded, np.arange(n) + w + k, axis=axis)
    return out


def interpolate(grid: Grid, values: np.ndarray, points: Sequence) -> np.ndarray:
    """Multilinear interpolation; periodic axes wrap, bounded axes extrapolate linearly."""
    points = [np.asarray(p, dtype=float) for p in points]
    if len(points) != grid.ndim:
        raise GridError(f"need {grid.ndim} coordinate arrays, got {len(points)}")
    points = np.broadcast_arrays(*points)
    lows, weights = [], []
    for axis, x in enumerate(points):
        h, n, lo = grid.spacing[axis], grid.cells[axis], grid.lower[axis]
        if grid.topology == PERIODIC:
            s = (x - lo) / h
            i0 = np.floor(s)
            lows.append((i0.astype(int) % n, (i0.astype(int) + 1) % n))
            weights.append(s - i0)
        else:
            s = (x - lo) / h - 0.5
            i0 = np.clip(np.floor(s), 0, n - 2).astype(int)
            lows.append((i0, i0 + 1))
            weights.append(s - i0)
    out = np.zeros(points[0].shape)
    for corner in itertools.product((0, 1), repeat=grid.ndim):
        w = np.ones(points[0].shape)
        idx = []
        for axis, c in enumerate(corner):
            w = w * (weights[axis] if c else 1.0 - weights[axis])
            idx.append(lows[axis][c])
        out = out + w * values[tuple(idx)]
    return out


# -- operators ---------------------------------------------------------------

def _values(field: ScalarField) -> np.ndarray:
    check_finite(field.values)
    return field.values


def discrete_gradient(field: ScalarField) -> np.ndarray:
    """Central differences, one component per axis: shape ``(ndim, *grid.shape)``."""
    u = _values(field)
    grid = field.grid
    comps = []
    for axis, h in enumerate(grid.spacing):
        off = [0] * grid.ndim
        off[axis] = 1
        plus = shifted(u, grid, off)
        off[axis] = -1
        minus = shifted(u, grid, off)
        comps.append((plus - minus) / (2.0 * h))
    return np.stack(comps)


def one_sided_gradients(values: np.ndarray, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Backward and forward differences per axis, each of shape ``(ndim, *shape)``."""
    back, fwd = [], []
    for axis, h in enumerate(grid.spacing):
        p = pad(values, grid, axis, 1)
        n = values.shape[axis]
        centre = np.take(p, np.arange(1, n + 1), axis=axis)
        left = np.take(p, np.arange(0, n), axis=axis)
        right = np.take(p, np.arange(2, n + 2), axis=axis)
        back.append((centre - left) / h)
        fwd.append((right - centre) / h)
    return np.stack(back), np.stack(fwd)


def laplacian_values(values: np.ndarray, grid: Grid) -> np.ndarray:
    out = np.zeros_like(values)
    for axis, h in enumerate(grid.spacing):
        p = pad(values, grid, axis, 1)
        n = values.shape[axis]
        out += (
            np.take(p, np.arange(2, n + 2), axis=axis)
            - 2.0 * values
            + np.take(p, np.arange(0, n), axis=axis)
        ) / h**2
    return out


def discrete_laplacian(field: ScalarField) -> ScalarField:
    return field.like(laplacian_values(_values(field), field.grid))


def _stencil_offsets(grid: Grid, direction: Sequence[float], h: float) -> tuple[int, ...]:
    xi = np.asarray(direction, dtype=float).reshape(-1)
    if xi.size != grid.ndim:
        raise GridError(f"direction {tuple(xi)} does not match a {grid.ndim}D grid")
    if not math.isclose(float(np.linalg.norm(xi)), 1.0, rel_tol=1e-9):
        raise GridError("direction must be a unit vector")
    if h <= 0:
        raise GridError("step h must be positive")
    offsets = []
    for comp, dx in zip(xi * h, grid.spacing):
        k = comp / dx
        if abs(k - round(k)) > 1e-9 * max(1.0, abs(k)):
            raise GridError(f"step {h} along {tuple(xi)} is not a grid displacement")
        offsets.append(int(round(k)))
    if not any(offsets):
        raise GridError("stencil displacement is zero")
    return tuple(offsets)


def second_difference(field: ScalarField, direction: Sequence[float], h: float) -> ScalarField:
    """``(w(x + h xi) + w(x - h xi) - 2 w(x)) / h**2`` on every sample point."""
    u = _values(field)
    offsets = _stencil_offsets(field.grid, direction, h)
    plus = shifted(u, field.grid, offsets)
    minus = shifted(u, field.grid, [-k for k in offsets])
    return field.like((plus + minus - 2.0 * u) / h**2)


def lp_norm(field: ScalarField | np.ndarray, p: float, grid: Grid | None = None) -> float:
    """Midpoint-rule ``L^p`` norm; ``p = inf`` gives the max norm."""
    if isinstance(field, ScalarField):
        grid, values = field.grid, field.values
    else:
        values = np.asarray(field, dtype=float)
        if grid is None:
            raise GridError("a raw array needs its grid")
    check_finite(values)
    p = float(p)
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    a = np.abs(values)
    if math.isinf(p):
        return float(a.max())
    if p == 1.0:
        return float(a.sum() * grid.cell_volume)
    return float((np.sum(a**p) * grid.cell_volume) ** (1.0 / p))


def oscillation(field: ScalarField) -> float:
    v = _values(field)
    return float(v.max() - v.min())


def trajectory_oscillation(traj: Trajectory) -> float:
    """max minus min over every stored frame."""
    stack = traj.stacked()
    return float(stack.max() - stack.min())


# -- serialisation -----------------------------------------------------------

def field_to_json(field: ScalarField) -> dict:
    return {"grid": field.grid.to_dict(), "time": field.time, "values": field.values.tolist()}


def field_from_json(data: dict) -> ScalarField:
    return ScalarField(Grid.from_dict(data["grid"]), np.asarray(data["values"]), data["time"])


def trajectory_to_json(traj: Trajectory) -> dict:
    return {
        "grid": traj.grid.to_dict(),
        "frames": [{"time": f.time, "values": f.values.tolist()} for f in traj.frames],
    }


def trajectory_from_json(data: dict) -> Trajectory:
    grid = Grid.from_dict(data["grid"])
    frames = [ScalarField(grid, np.asarray(f["values"]), f["time"]) for f in data["frames"]]
    return Trajectory(grid, [f.time for f in frames], frames)


def _csv_rows(field: ScalarField):
    grid = field.grid
    coords = grid.coordinates
    for idx in np.ndindex(*grid.shape):
        yield [*idx, *(repr(float(coords[a][i])) for a, i in enumerate(idx)),
               repr(float(field.values[idx]))]


def _csv_header(grid: Grid) -> list[str]:
    axes = "xy"[: grid.ndim]
    return [f"i{a}" for a in axes] + list(axes) + ["value"]


def write_field_csv(field: ScalarField, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_csv_header(field.grid))
        writer.writerows(_csv_rows(field))


def write_trajectory_csv(traj: Trajectory, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", *_csv_header(traj.grid)])
        for frame in traj.frames:
            for row in _csv_rows(frame):
                writer.writerow([repr(frame.time), *row])


def read_field_csv(path: str | Path, grid: Grid, time: float = 0.0) -> ScalarField:
    values = np.empty(grid.shape)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            idx = tuple(int(v) for v in row[: grid.ndim])
            values[idx] = float(row[-1])
    return ScalarField(grid, values, time)


def write_json(data: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(data, indent=1, sort_keys=True))
