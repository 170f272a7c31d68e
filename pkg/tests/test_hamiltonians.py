from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hjlab.hamiltonians import (
    CATALOG,
    HamiltonianSpec,
    StructureConstants,
    StructureError,
    default_samples,
    get_hamiltonian,
    gradient_mismatch,
    legendre,
    power_hamiltonian,
    verify_structure,
)

CONVEX_WITH_CONJUGATE = ["power-1.5", "power-2", "power-3", "quadratic"]


@pytest.mark.parametrize("hid", sorted(CATALOG))
def test_vanishes_at_origin(hid):
    H = CATALOG[hid]
    assert H(np.zeros(1))[0] == 0.0
    assert H.evaluate(np.zeros((2, 1)))[0] == 0.0


@pytest.mark.parametrize("hid", sorted(CATALOG))
@pytest.mark.parametrize("dim", [1, 2])
def test_gradient_matches_finite_differences(hid, dim):
    assert gradient_mismatch(CATALOG[hid], default_samples(dim)) <= 1e-6


@pytest.mark.parametrize("hid", sorted(CATALOG))
@pytest.mark.parametrize("dim", [1, 2])
def test_declared_constants_verify(hid, dim):
    report = verify_structure(CATALOG[hid], default_samples(dim))
    assert all(check.ok for check in report.values()), report
    assert report["H2"].status == "trivially satisfied"


def test_undeclared_constants_are_not_failures():
    report = verify_structure(CATALOG["eikonal"])
    assert report["H1"].status == "not declared"
    assert report["H4"].status == "not declared"


def test_quadratic_h1_slack_identity():
    H = CATALOG["quadratic"]
    assert H.constants.C1 == 0.5 and H.constants.C1t == 0.0
    report = verify_structure(H)
    # D_pH.p - H = p^2/2 exactly, so the declared bound is sharp
    assert abs(report["H1"].min_slack) <= 1e-12
    assert report["H4"].status == "passed"
    assert H.constants.C4 == 1.0


def test_nonconvex_member_constants():
    H = CATALOG["nonconvex"]
    assert (H.constants.C1, H.constants.C1t) == (1.0, 6.0)
    report = verify_structure(H)
    assert report["H1"].status == "passed"
    # sampled slack of D_pH.p - H - (|p|^2 - 6) stays nonnegative
    p = default_samples()
    slack = np.sum(H.gradient(p) * p, axis=0) - H.evaluate(p) - (p[0] ** 2 - 6)
    assert slack.min() >= 0


def test_wrong_constant_fails():
    H = CATALOG["quadratic"]
    bad = HamiltonianSpec(
        "bad", H.evaluate, H.gradient, 2.0,
        StructureConstants(C1=0.75, C1t=0.0, C4=1.5, C4t=0.0),
    )
    report = verify_structure(bad)
    assert report["H1"].status == "failed"
    assert report["H4"].status == "failed"


def test_unknown_id():
    with pytest.raises(KeyError):
        get_hamiltonian("does-not-exist")


class TestLegendre:
    def test_self_dual_quadratic(self):
        assert float(legendre(CATALOG["quadratic"], 1.0)) == pytest.approx(0.5)

    def test_power_two_closed_form(self):
        assert float(legendre(CATALOG["power-2"], 2.0)) == pytest.approx(2.0)

    @pytest.mark.parametrize("hid", CONVEX_WITH_CONJUGATE)
    def test_numeric_matches_closed_form(self, hid):
        H = CATALOG[hid]
        q = np.linspace(-20, 20, 81)
        assert np.allclose(legendre(H, q, "numeric"), legendre(H, q), rtol=1e-10, atol=1e-10)

    @pytest.mark.parametrize("hid", CONVEX_WITH_CONJUGATE)
    def test_nonnegative_and_zero_at_origin(self, hid):
        H = CATALOG[hid]
        q = np.linspace(-5, 5, 41)
        assert np.all(legendre(H, q, "numeric") >= 0)
        assert float(legendre(H, 0.0, "numeric")) == pytest.approx(0.0, abs=1e-12)

    def test_coordinate_ascent_fallback(self):
        H = CATALOG["quadratic"]
        plain = HamiltonianSpec("plain", H.evaluate, H.gradient, 2.0)
        q = np.array([[0.3, 1.0], [0.4, -2.0]])
        assert np.allclose(legendre(plain, q), [0.125, 2.5], atol=1e-10)

    def test_nonconvex_rejected(self):
        with pytest.raises(StructureError):
            legendre(CATALOG["nonconvex"], 1.0)

    def test_eikonal_has_no_finite_conjugate(self):
        with pytest.raises(StructureError):
            legendre(CATALOG["eikonal"], 0.5)

    def test_q_max_enforced(self):
        with pytest.raises(StructureError):
            legendre(CATALOG["quadratic"], 25.0)

    @settings(max_examples=60, deadline=None)
    @given(
        gamma=st.sampled_from([1.5, 2.0, 3.0]),
        p=st.floats(-10, 10),
        q=st.floats(-20, 20),
    )
    def test_fenchel_young(self, gamma, p, q):
        H = power_hamiltonian(gamma)
        assert p * q <= float(H(p)) + float(legendre(H, q, "numeric")) + 1e-8


def test_speed_bound_covers_box():
    rng = np.random.default_rng(3)
    for hid in ("power-1.5", "power-3", "nonconvex"):
        H = CATALOG[hid]
        lo, hi = np.array([-1.3, 0.2]), np.array([0.7, 2.1])
        bound = H.speed_bound(lo, hi)
        p = lo[:, None] + (hi - lo)[:, None] * rng.random((2, 500))
        assert np.all(np.abs(H.gradient(p)).max(axis=1) <= bound * 1.01 + 1e-12)
