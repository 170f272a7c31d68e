from __future__ import annotations

import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hjlab.fields import Grid, ScalarField
from hjlab.forward import stationary_richardson
from hjlab.hamiltonians import CATALOG
from hjlab.rates import (
    DEFAULT_EPS_LADDER,
    NormSpec,
    RateReport,
    SweepResult,
    SplitError,
    ViscosityProblem,
    fit_order,
    gradient_error,
    split_error,
    stationary_sweep,
    vanishing_viscosity_sweep,
)

LADDER = [0.1 * 2.0**-k for k in range(6)]


class TestFitOrder:
    def test_linear(self):
        pairs = [(0.1, 0.03), (0.05, 0.3 * 0.05), (0.025, 0.3 * 0.025)]
        assert fit_order(pairs) == pytest.approx(1.0, abs=1e-12)

    def test_power(self):
        assert fit_order([(e, e**0.75) for e in LADDER]) == pytest.approx(0.75, abs=1e-12)

    def test_noisy(self):
        pairs = [(e, e * (1 + 0.05 * (-1) ** k)) for k, e in enumerate(LADDER)]
        x, y = np.log(LADDER), np.log([b for _, b in pairs])
        slope = np.sum((x - x.mean()) * (y - y.mean())) / np.sum((x - x.mean()) ** 2)
        assert fit_order(pairs) == pytest.approx(slope, abs=1e-12)
        assert abs(fit_order(pairs) - 1.0) <= 0.03

    @pytest.mark.parametrize("pairs", [[(0.1, 1.0), (0.05, 0.5)],
                                       [(0.1, 1.0), (0.05, 0.0), (0.02, 0.1)],
                                       [(-0.1, 1.0), (0.05, 0.5), (0.02, 0.1)]])
    def test_rejects(self, pairs):
        with pytest.raises(ValueError):
            fit_order(pairs)

    @settings(max_examples=30, deadline=None)
    @given(order=st.floats(0.1, 3.0), c=st.floats(1e-3, 1e3))
    def test_recovers_power_laws(self, order, c):
        assert fit_order([(e, c * e**order) for e in LADDER]) == pytest.approx(order, abs=1e-10)


class TestSplit:
    grid = Grid.periodic(0, 1, 64)

    def test_identical(self):
        u = ScalarField.from_function(self.grid, np.sin)
        assert split_error(u, u, 2.0) == SplitError(0.0, 0.0, 0.0)
        assert gradient_error(u, u, 1.0) == 0.0

    def test_shift(self):
        u = ScalarField.from_function(self.grid, np.sin)
        e = split_error(u.like(u.values + 0.01), u, 2.0)
        assert e.plus == pytest.approx(0.01, rel=1e-12)
        assert e.minus == 0.0

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**31), p=st.sampled_from([1.0, 1.5, 2.0, 4.0, math.inf]))
    def test_parts_combine(self, seed, p):
        rng = np.random.default_rng(seed)
        a = ScalarField(self.grid, rng.normal(size=64))
        b = ScalarField(self.grid, rng.normal(size=64))
        e = split_error(a, b, p)
        if math.isinf(p):
            assert e.total == max(e.plus, e.minus)
        else:
            assert e.total**p <= (e.plus**p + e.minus**p) * (1 + 1e-12)
            assert e.total**p == pytest.approx(e.plus**p + e.minus**p, rel=1e-12)

    def test_grid_mismatch(self):
        u = ScalarField(self.grid, np.zeros(64))
        with pytest.raises(ValueError):
            split_error(u, ScalarField(Grid.periodic(0, 1, 32), np.zeros(32)), 1.0)


class TestReport:
    def _report(self, **kw):
        pairs = [(e, 2 * e) for e in reversed(LADDER)]
        return RateReport("demo", "one-sided bound", NormSpec(1.0), "total", pairs, 1.0, 0.15, **kw)

    def test_sorted_and_pass(self):
        r = self._report()
        assert [a for a, _ in r.pairs] == sorted(LADDER)
        assert r.fitted_order == pytest.approx(1.0, abs=1e-12)
        assert r.passed

    def test_rules(self):
        fast = [(e, e**2) for e in LADDER]
        one = RateReport("a", "", NormSpec(2.0), "plus", fast, 1.0, 0.15)
        two = RateReport("a", "", NormSpec(2.0), "plus", fast, 1.0, 0.15, one_sided=False)
        capped = RateReport("a", "", NormSpec(2.0), "plus", fast, 1.0, 0.15, upper=1.3)
        assert one.passed and not two.passed and not capped.passed

    def test_flagged_excluded(self):
        pairs = [(e, e) for e in LADDER[:-1]] + [(LADDER[-1], 1.0)]
        r = RateReport("a", "", NormSpec(1.0), "total", pairs, 1.0, 0.1, flagged=[LADDER[-1]])
        assert r.fitted_order == pytest.approx(1.0, abs=1e-12)
        few = RateReport("a", "", NormSpec(1.0), "total", pairs[:3], 1.0, 0.1,
                         flagged=[LADDER[0]])
        assert math.isnan(few.fitted_order) and not few.passed

    def test_outputs(self, tmp_path):
        r = self._report()
        r.write_json(tmp_path / "r.json")
        data = json.loads((tmp_path / "r.json").read_text())
        assert data["pass"] is True and data["norm"]["p"] == 1.0
        assert data["within_hypotheses"] is True
        r.write_csv(tmp_path / "r.csv")
        rows = list(csv.reader(open(tmp_path / "r.csv")))
        assert rows[0] == ["param", "error_total", "error_plus", "error_minus", "norm_p"]
        assert float(rows[1][0]) == min(LADDER)
        r.write_plot_data(tmp_path / "r.dat")
        lines = [s for s in (tmp_path / "r.dat").read_text().splitlines() if not s.startswith("#")]
        a, b = map(float, lines[0].split())
        assert a == pytest.approx(math.log10(min(LADDER)))
        assert b == pytest.approx(math.log10(2 * min(LADDER)))
        r.write_json(tmp_path / "again.json")
        assert (tmp_path / "again.json").read_bytes() == (tmp_path / "r.json").read_bytes()


class TestSweep:
    def _problem(self, ref_noise=0.0):
        grid = Grid.periodic(0, 1, 32)
        u0 = ScalarField(grid, np.full(32, 2.0))

        def ref(t):
            return u0.like(u0.values.copy(), t)

        def check(t):
            return u0.like(u0.values + ref_noise, t)

        return ViscosityProblem(CATALOG["quadratic"], u0, 0.2, ref, check)

    def test_constant_data_has_zero_error(self):
        res = vanishing_viscosity_sweep(self._problem())
        for key in ("Linf", "L1", "L2"):
            assert all(e.total == 0.0 for e in res.errors[key])

    def test_ladder_validation(self):
        with pytest.raises(ValueError):
            vanishing_viscosity_sweep(self._problem(), [0.1, 0.05, 0.025])
        with pytest.raises(ValueError):
            vanishing_viscosity_sweep(self._problem(), [0.1, 0.05, 0.02, 0.01, 0.005])

    def test_guard_flags_pairs(self):
        res = SweepResult(LADDER, [NormSpec(1.0)],
                          {"L1": [SplitError(e, 0, e) for e in LADDER]},
                          {"L1": 1e-3}, {}, 0.01)
        flagged = res.flagged("L1")
        assert flagged == [e for e in LADDER if e < 1e-2]
        assert res.report("x", "", NormSpec(1.0), "total", 1.0, 0.1).flagged == flagged

    def test_default_ladder(self):
        assert DEFAULT_EPS_LADDER == pytest.approx(LADDER, rel=1e-15)


class TestStationary:
    def test_eikonal_rate_one(self):
        def solve(eps):
            return stationary_richardson(CATALOG["eikonal"], eps, 0.0, np.ones_like, -1, 1, 681,
                                         (0.0, 0.0))

        def exact(eps, x):
            return 1 - np.abs(x) - eps * (np.exp(-np.abs(x) / eps) - math.exp(-1 / eps))

        rows = stationary_sweep(solve, lambda x: 1 - np.abs(x), exact)
        for r in rows:
            assert r.closed_form_mismatch <= 5 * r.h**2
            # the centre node is sampled, so the sup matches eps(1 - e^{-1/eps})
            assert r.error == pytest.approx(r.epsilon * (1 - math.exp(-1 / r.epsilon)),
                                            abs=5 * r.h**2)
        assert fit_order([(r.epsilon, r.error) for r in rows]) == pytest.approx(1.0, abs=0.1)

    def test_reaction_diffusion_rate_half(self):
        def bc(eps):
            s = math.sqrt(eps)
            return s / math.tanh(1 / (2 * s))

        def solve(eps):
            return stationary_richardson(CATALOG["zero"], eps, 1.0, np.zeros_like, 0, 1, 201,
                                         (bc(eps), bc(eps)))

        def exact(eps, x):
            s = math.sqrt(eps)
            return s * np.cosh((x - 0.5) / s) / math.sinh(1 / (2 * s))

        rows = stationary_sweep(solve, np.zeros_like, exact, boundary=bc)
        for r in rows:
            assert r.error == pytest.approx(bc(r.epsilon), rel=1e-12)
            assert r.closed_form_mismatch <= 5 * r.h**2
        assert fit_order([(r.epsilon, r.error) for r in rows]) == pytest.approx(0.5, abs=0.1)
