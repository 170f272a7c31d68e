from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hjlab.errors import CFLError, GridError, ReferenceGuardError
from hjlab.fields import Grid, ScalarField, lp_norm
from hjlab.forward import SolveConfig, hopf_lax_separable_2d, solve_inviscid
from hjlab.godunov import (
    GodunovConfig,
    godunov_evolve,
    l1_rate_experiment,
    project,
    semiconcavity_norms,
)
from hjlab.hamiltonians import CATALOG
from hjlab.rates import fit_order

QUAD = CATALOG["quadratic"]
TORUS = Grid.periodic([0, 0], [1, 1], [8, 8])


def _cos(x):
    return -np.cos(2 * np.pi * x)


def _cos2(x, y):
    return _cos(x) + _cos(y)


class TestProject:
    def test_affine_and_constant(self):
        fine = Grid.box([0, 0], [1, 1], [15, 15])
        coarse = Grid.box([0, 0], [1, 1], [5, 5])
        u = ScalarField.from_function(fine, lambda x, y: 2 * x - 3 * y + 1)
        assert np.allclose(project(u, coarse).values, u.values, atol=1e-13)
        c = ScalarField(TORUS.refine(4), np.full((32, 32), 7.0))
        assert np.array_equal(project(c, TORUS).values, c.values)

    def test_quadratic_remainder(self):
        errs = []
        for n in (8, 16, 32):
            coarse = Grid.periodic([0, 0], [1, 1], [n, n])
            fine = coarse.refine(4)
            u = ScalarField.from_function(fine, lambda x, y: _cos(x))
            errs.append(lp_norm(u.values - project(u, coarse).values, 1, fine))
            dx = 1 / n
            # bilinear remainder of a 1D profile: |u''| dx^2 / 8 at most
            assert errs[-1] <= (2 * np.pi) ** 2 * dx**2 / 8
        assert fit_order(list(zip([1 / 8, 1 / 16, 1 / 32], errs))) == pytest.approx(2, abs=0.05)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**31), k=st.sampled_from([1, 2, 4]))
    def test_idempotent(self, seed, k):
        fine = TORUS.refine(k)
        u = ScalarField(fine, np.random.default_rng(seed).normal(size=fine.shape))
        once = project(u, TORUS)
        assert np.allclose(project(once, TORUS).values, once.values, atol=1e-13)

    def test_rejects_mismatched_grids(self):
        u = ScalarField(Grid.periodic([0, 0], [1, 1], [20, 20]), np.zeros((20, 20)))
        with pytest.raises(GridError):
            project(u, TORUS)
        with pytest.raises(GridError):
            project(ScalarField(Grid.box([0, 0], [1, 1], [16, 16]), np.zeros((16, 16))),
                    Grid.box([0, 0], [1, 1], [8, 8]))


class TestConfig:
    def test_validation(self):
        with pytest.raises(GridError):
            GodunovConfig(Grid.periodic([0, 0], [1, 1], [8, 32]), 0.01, 0.1)
        with pytest.raises(ValueError):
            GodunovConfig(TORUS, 0.01, 0.1, fine_factor=2)
        with pytest.raises(ValueError):
            GodunovConfig(TORUS, 0.03, 0.1)
        with pytest.raises(GridError):
            GodunovConfig(Grid.periodic(0, 1, 8), 0.01, 0.1)

    def test_step_divides_horizon(self):
        cfg = GodunovConfig.for_problem(TORUS, QUAD, 2 * np.pi, 0.3)
        assert cfg.steps * cfg.dt == pytest.approx(0.3, rel=1e-14)
        assert 2 * np.pi * cfg.dt / cfg.delta <= 0.24

    def test_cfl_violation(self):
        u0 = ScalarField.from_function(TORUS.refine(4), _cos2)
        with pytest.raises(CFLError):
            godunov_evolve(QUAD, u0, GodunovConfig(TORUS, 0.05, 0.1))


class TestEvolve:
    def test_constant(self):
        u0 = ScalarField(TORUS, np.full((8, 8), 3.0))
        traj = godunov_evolve(QUAD, u0, GodunovConfig(TORUS, 0.01, 0.1))
        for frame in traj.frames:
            assert np.array_equal(frame.values, np.full((32, 32), 3.0))
        assert traj.meta["truncation_error"] == 0.0

    def test_identity_projection_is_plain_solver(self):
        grid = Grid.periodic([0, 0], [1, 1], [24, 24])
        u0 = ScalarField.from_function(grid, _cos2)
        G = 2 * np.pi * np.sqrt(2)
        cfg = GodunovConfig.for_problem(grid, QUAD, G, 0.1, fine_factor=1)
        traj = godunov_evolve(QUAD, u0, cfg, G)
        times = tuple(n * cfg.dt for n in range(1, cfg.steps + 1))
        plain = solve_inviscid(QUAD, u0, cfg=SolveConfig(T=0.1, ladder=1, output_times=times,
                                                         gradient_bound=G))
        assert len(plain.frames) == len(traj.frames)
        for a, b in zip(plain.frames, traj.frames):
            assert a.time == pytest.approx(b.time, abs=1e-14)
            assert np.allclose(a.values, b.values, rtol=0, atol=1e-12)

    def test_records_both_frames(self):
        u0 = ScalarField.from_function(TORUS.refine(4), _cos2)
        cfg = GodunovConfig.for_problem(TORUS, QUAD, 2 * np.pi * np.sqrt(2), 0.05)
        traj = godunov_evolve(QUAD, u0, cfg)
        pre = traj.meta["pre_projection"]
        assert len(traj.frames) == cfg.steps + 1
        assert len(pre.frames) == cfg.steps
        assert np.allclose(pre.times, traj.times[1:])
        errs = traj.meta["projection_errors"]
        assert traj.meta["truncation_error"] == pytest.approx(cfg.steps * max(errs))
        norms = semiconcavity_norms(traj, cfg.delta)
        assert len(norms) == len(traj.frames) and all(np.isfinite(norms))

    def test_truncation_error_is_first_order(self):
        trunc = []
        for n in (8, 16, 32):
            grid = Grid.periodic([0, 0], [1, 1], [n, n])
            u0 = ScalarField.from_function(grid.refine(4), _cos2)
            cfg = GodunovConfig.for_problem(grid, QUAD, 2 * np.pi * np.sqrt(2), 0.1)
            trunc.append(godunov_evolve(QUAD, u0, cfg).meta["truncation_error"])
        assert fit_order(list(zip([1 / 8, 1 / 16, 1 / 32], trunc))) >= 0.85

    def test_converges_to_exact(self):
        errs = []
        for n in (8, 16, 32):
            grid = Grid.periodic([0, 0], [1, 1], [n, n])
            u0 = ScalarField.from_function(grid.refine(4), _cos2)
            cfg = GodunovConfig.for_problem(grid, QUAD, 2 * np.pi * np.sqrt(2), 0.1)
            traj = godunov_evolve(QUAD, u0, cfg)
            ref = hopf_lax_separable_2d(QUAD, _cos, _cos, traj.grid, 0.1, lipschitz=2 * np.pi)
            errs.append(lp_norm(traj.final.values - ref.values, 1, traj.grid))
        local = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        # pre-asymptotic on these grids: the local order rises towards 1
        assert local[1] > local[0] and local[1] >= 0.75


class TestRateExperiment:
    def test_small_ladder(self):
        r = l1_rate_experiment(QUAD, _cos2, (8, 12, 16), 0.1, separable=(_cos, _cos),
                               lipschitz=2 * np.pi)
        assert r.parameter == "delta"
        assert r.hypotheses and not r.notes
        assert r.fitted_order >= 0.6
        assert len(r.extra["truncation_error"]) == 3

    def test_kink_is_outside_hypotheses(self):
        def tent(x):
            return np.abs(((x + 0.5) % 1.0) - 0.5)

        r = l1_rate_experiment(QUAD, lambda x, y: tent(x) + tent(y), (8, 12, 16), 0.05,
                               separable=(tent, tent), lipschitz=1.0)
        assert not r.hypotheses
        assert r.notes and "outside theorem hypotheses" in r.notes[0]
        assert np.isfinite(r.fitted_order)

    def test_guard(self):
        def noisy(grid, t):
            return ScalarField(grid, np.zeros(grid.shape), t)

        def other(grid, t):
            return ScalarField(grid, np.ones(grid.shape), t)

        with pytest.raises(ReferenceGuardError):
            l1_rate_experiment(QUAD, _cos2, (8, 12, 16), 0.05, reference=noisy,
                               reference_check=other)
