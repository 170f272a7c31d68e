from __future__ import annotations

import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hjlab.errors import StructureError
from hjlab.estimators import (
    EstimateReport,
    all_passed,
    discrete_semiconcavity_norm,
    gradient_decay_check,
    oleinik_check,
    oleinik_constant,
    passes_at_two_refinements,
    semiconcavity_constant,
    semiconcavity_decay_check,
    semiconcavity_precheck,
    semiconcavity_preservation_check,
    ssh_positive_part,
    worst_margin,
    write_estimate_csv,
)
from hjlab.fields import Grid, ScalarField
from hjlab.forward import ConservationLawConfig, SolveConfig, conservation_law_1d, solve_viscous
from hjlab.hamiltonians import CATALOG

QUAD = CATALOG["quadratic"]


def _fan(x, t):
    return np.where(np.abs(x) <= t, x**2 / (2 * t), np.abs(x) - t / 2)


class TestSemiconcavityConstant:
    def test_concave_parabola(self):
        grid = Grid.box(-1, 1, 40)
        u = ScalarField.from_function(grid, lambda x: -(x**2))
        # extrapolated ghosts flatten the boundary cells
        assert semiconcavity_constant(u, interior=1) == pytest.approx(-2.0, abs=1e-9)

    def test_exact_fan(self):
        grid = Grid.box(-2, 2, 400)
        u = ScalarField.from_function(grid, lambda x: _fan(x, 0.5))
        assert semiconcavity_constant(u) == pytest.approx(2.0, abs=1e-9)

    def test_kink(self):
        grid = Grid.periodic(-1, 1, 8)
        u = ScalarField.from_function(grid, np.abs)
        assert semiconcavity_constant(u, [0.25]) == pytest.approx(8.0)
        fine = ScalarField.from_function(Grid.periodic(-1, 1, 64), np.abs)
        assert semiconcavity_constant(fine) == pytest.approx(2 / (2 / 64))

    def test_diagonal_directions(self):
        grid = Grid.periodic([0, 0], [1, 1], [32, 32])
        u = ScalarField.from_function(grid, lambda x, y: np.sin(2 * np.pi * (x + y)))
        axes = semiconcavity_constant(u, directions=[(1.0, 0.0), (0.0, 1.0)])
        both = semiconcavity_constant(u)
        assert both >= axes
        assert both == pytest.approx(2 * 4 * np.pi**2, rel=2e-2)

    @settings(max_examples=25, deadline=None)
    @given(values=arrays(float, 24, elements=st.floats(-5, 5)), extra=st.integers(2, 5))
    def test_monotone_in_probe_set(self, values, extra):
        u = ScalarField(Grid.periodic(0, 1, 24), values)
        h = 1 / 24
        assert semiconcavity_constant(u, [h, extra * h]) >= semiconcavity_constant(u, [h])


class TestSSH:
    def test_concave_field(self):
        grid = Grid.box(-1, 1, 64)
        u = ScalarField.from_function(grid, lambda x: -np.cosh(x))
        assert ssh_positive_part(u, 2) == pytest.approx(0.0, abs=1e-12)

    def test_parabola_l1(self):
        grid = Grid.box(-1, 1, 200)
        u = ScalarField.from_function(grid, lambda x: x**2 / 2)
        # extrapolated boundary cells carry a vanishing Laplacian
        assert ssh_positive_part(u, 1) == pytest.approx(2.0, abs=2 * grid.spacing[0])

    def test_fan_sup(self):
        grid = Grid.box(-2, 2, 400)
        u = ScalarField.from_function(grid, lambda x: _fan(x, 0.5))
        assert ssh_positive_part(u, np.inf) == pytest.approx(2.0, abs=1e-9)

    @settings(max_examples=25, deadline=None)
    @given(values=arrays(float, (8, 8), elements=st.floats(-5, 5)))
    def test_trace_below_dimension_times_max(self, values):
        u = ScalarField(Grid.periodic([0, 0], [1, 1], [8, 8]), values)
        axes = [(1.0, 0.0), (0.0, 1.0)]
        bound = max(2 * semiconcavity_constant(u, directions=axes), 0.0)
        assert ssh_positive_part(u, np.inf) <= bound * (1 + 1e-12) + 1e-9


def test_discrete_norm_ignores_small_steps():
    grid = Grid.periodic(0, 1, 64)
    u = ScalarField.from_function(grid, lambda x: -np.cos(2 * np.pi * x))
    concave = ScalarField.from_function(Grid.box(-1, 1, 64), lambda x: -(x**2))
    assert discrete_semiconcavity_norm(concave, 4 / 64) == 0.0
    assert discrete_semiconcavity_norm(u, 4 / 64) > 0
    kink = ScalarField.from_function(Grid.periodic(-1, 1, 64), np.abs)
    assert discrete_semiconcavity_norm(kink, 4 / 64) > 0


def test_precheck_flags_kinks():
    ok, _ = semiconcavity_precheck(
        lambda n: ScalarField.from_function(Grid.periodic(0, 1, n),
                                            lambda x: -np.cos(2 * np.pi * x)), [32, 64, 128])
    assert ok
    bad, consts = semiconcavity_precheck(
        lambda n: ScalarField.from_function(Grid.periodic(-1, 1, n), np.abs), [32, 64, 128])
    assert not bad and consts[2] == pytest.approx(4 * consts[0])


class TestReports:
    def test_pass_rule(self):
        r = EstimateReport("q", 1.0, 2.0, 1.95, 0.1)
        assert r.margin == pytest.approx(0.05) and r.passed
        assert not EstimateReport("q", 1.0, 2.0, 1.8, 0.1).passed

    def test_two_refinements_needs_shrinking_margin(self):
        coarse = [EstimateReport("q", 1.0, 1.05, 1.0, 0.1)]
        fine = [EstimateReport("q", 1.0, 1.03, 1.0, 0.05)]
        grown = [EstimateReport("q", 1.0, 1.07, 1.0, 0.1)]
        assert passes_at_two_refinements(coarse, fine)
        assert not passes_at_two_refinements(coarse, grown)

    def test_csv_columns(self, tmp_path):
        path = tmp_path / "rows.csv"
        write_estimate_csv([EstimateReport("q", 0.5, 1.0, 2.0, 0.1)], path)
        rows = list(csv.reader(open(path)))
        assert rows[0] == ["time", "measured", "bound", "margin", "pass"]
        assert rows[1][-1] == "true"
        assert EstimateReport("q", 0.5, 1.0, 2.0, 0.1).to_dict()["theoretical_bound"] == 2.0


def _fan_run(n, hid="quadratic", lo=-2.0, hi=2.0, T=1.0):
    grid = Grid.box(lo, hi, n)
    u0 = ScalarField.from_function(grid, np.abs)
    return solve_viscous(CATALOG[hid], u0,
                         cfg=SolveConfig(T=T, output_times=(0.5,), cfl_safety=0.1))


class TestGradientDecay:
    def test_clipped_cone(self):
        grid = Grid.box(-2, 2, 400)
        u0 = ScalarField.from_function(grid, lambda x: np.minimum(np.abs(x), 1.0))
        traj = solve_viscous(QUAD, u0, cfg=SolveConfig(T=1.0))
        reports = gradient_decay_check(traj, QUAD)
        assert all_passed(reports)
        last = reports[-1]
        assert last.time == 1.0
        assert last.bound == pytest.approx(np.sqrt(2 * (traj.stacked().max() - traj.stacked().min())))

    def test_constant_data(self):
        grid = Grid.periodic(0, 1, 32)
        traj = solve_viscous(QUAD, ScalarField(grid, np.ones(32)), cfg=SolveConfig(T=0.5))
        assert all(r.measured == 0.0 for r in gradient_decay_check(traj, QUAD))

    def test_equality_case(self):
        n = 1024
        grid = Grid.periodic(0, 1, n)
        h = grid.spacing[0]
        x = grid.coordinates[0]
        w = 4 * h
        u0 = np.clip(np.minimum((x - 0.25) / w + 0.5, (0.75 - x) / w + 0.5), 0.0, 1.0)
        traj = solve_viscous(QUAD, ScalarField(grid, u0), cfg=SolveConfig(T=0.01, ladder=3))
        last = gradient_decay_check(traj, QUAD)[-1]
        assert abs(last.measured / last.bound - 1) <= 0.15
        assert last.passed

    def test_requires_coercivity_constants(self):
        grid = Grid.periodic(0, 1, 16)
        traj = solve_viscous(CATALOG["nonconvex"], ScalarField(grid, np.zeros(16)),
                             cfg=SolveConfig(T=0.1))
        with pytest.raises(StructureError):
            gradient_decay_check(traj, CATALOG["nonconvex"])


class TestSemiconcavityDecay:
    def test_fan_reaches_bound(self):
        traj = _fan_run(400)
        h = traj.grid.spacing[0]
        assert semiconcavity_constant(traj.at(0.5)) == pytest.approx(2.0, abs=10 * h)
        assert passes_at_two_refinements(semiconcavity_decay_check(traj, QUAD),
                                         semiconcavity_decay_check(_fan_run(800), QUAD))

    def test_concave_data(self):
        grid = Grid.box(-1, 1, 100)
        traj = solve_viscous(QUAD, ScalarField.from_function(grid, lambda x: -(x**2)),
                             cfg=SolveConfig(T=0.3))
        assert all_passed(semiconcavity_decay_check(traj, QUAD))

    def test_subquadratic_member(self):
        H = CATALOG["power-1.5"]
        results = []
        for n in (256, 512):
            traj = _fan_run(n, "power-1.5")
            results.append(semiconcavity_decay_check(traj, H))
            assert all(r.measured <= r.bound for r in results[-1])

    def test_superquadratic_rejected(self):
        grid = Grid.periodic(0, 1, 16)
        traj = solve_viscous(CATALOG["power-3"], ScalarField(grid, np.zeros(16)),
                             cfg=SolveConfig(T=0.1))
        with pytest.raises(StructureError):
            semiconcavity_decay_check(traj, CATALOG["power-3"])


class TestPreservation:
    @pytest.mark.parametrize("n", [128, 256])
    def test_cosine_data(self, n):
        grid = Grid.periodic(0, 1, n)
        u0 = ScalarField.from_function(grid, lambda x: -np.cos(2 * np.pi * x))
        traj = solve_viscous(QUAD, u0, cfg=SolveConfig(T=0.3))
        reports = semiconcavity_preservation_check(traj, QUAD, 4 * np.pi**2)
        assert all_passed(reports)
        assert reports[0].bound == pytest.approx(4 * np.pi**2)

    def test_concave_data(self):
        grid = Grid.box(-1, 1, 100)
        traj = solve_viscous(QUAD, ScalarField.from_function(grid, lambda x: -(x**2)),
                             cfg=SolveConfig(T=0.3))
        assert all_passed(semiconcavity_preservation_check(traj, QUAD, 0.0))

    def test_forced_bound(self):
        grid = Grid.periodic(0, 1, 128)
        u0 = ScalarField.from_function(grid, lambda x: -np.cos(2 * np.pi * x))
        f = lambda x, t: np.sin(2 * np.pi * x) * (t < 0.5)  # noqa: E731
        traj = solve_viscous(QUAD, u0, f, SolveConfig(T=0.8, output_times=(0.5,)))
        cf = lambda t: 4 * np.pi**2 * min(t, 0.5)  # noqa: E731
        reports = semiconcavity_preservation_check(traj, QUAD, 4 * np.pi**2, cf)
        assert all_passed(reports)
        assert reports[-1].bound == pytest.approx(4 * np.pi**2 * 1.5)


class TestOleinik:
    def test_constant_for_burgers(self):
        assert oleinik_constant(2.0) == 0.5

    def test_post_shock_two_refinements(self):
        runs = []
        for n in (256, 512):
            grid = Grid.periodic(0, 1, n)
            U0 = ScalarField.from_function(grid, lambda x: np.sin(2 * np.pi * x))
            traj = conservation_law_1d(2.0, 0.0, U0, 0.5, ConservationLawConfig(flux="rusanov"))
            runs.append(oleinik_check(traj, 2.0))
        assert passes_at_two_refinements(*runs)
        assert worst_margin(runs[1]) < 0

    def test_constant_data(self):
        grid = Grid.periodic(0, 1, 32)
        traj = conservation_law_1d(2.0, 0.0, ScalarField(grid, np.full(32, 0.4)), 0.5)
        assert all(r.measured == pytest.approx(0.0, abs=1e-12) for r in oleinik_check(traj, 2.0))
