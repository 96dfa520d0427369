"""Landscape thresholds against oracles written directly from the displayed formulas."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from normsol.errors import NoRoots
from normsol.landscape import (
    Constants,
    LandscapeReport,
    TruncationProfile,
    check_critical_condition,
    check_mass_condition,
    coefficient_B,
    compute_landscape,
    critical_condition_sides,
    find_R0_R1,
    g_a,
    g_bar,
    r0,
    tau,
    tau_prime,
    w_a,
    w_a_prime,
    w_max_closed_form,
)
from normsol.params import ProblemParams

from conftest import desk_params


def oracle_w(r, P, h, c):
    return (0.5 - h * c.C_q**P.q * P.a ** (P.q * (1 - c.gamma_q)) * r ** (P.q * c.gamma_q - 2) / P.q
            - P.eta * c.C_p**P.p * P.a ** (P.p * (1 - c.gamma_p)) * r ** (P.p * c.gamma_p - 2) / P.p)


def oracle_w_prime(r, P, h, c):
    qg, pg = P.q * c.gamma_q, P.p * c.gamma_p
    return (-h * c.C_q**P.q * P.a ** (P.q * (1 - c.gamma_q)) * (qg - 2) * r ** (qg - 3) / P.q
            - P.eta * c.C_p**P.p * P.a ** (P.p * (1 - c.gamma_p)) * (pg - 2) * r ** (pg - 3) / P.p)


def log_domain_B(P, c):
    qg, pg = P.q * c.gamma_q, P.p * c.gamma_p
    D = pg - qg
    logB = (math.log(D) - math.log(2 - qg) + (pg - 2) / D * (math.log(2 - qg) - math.log(pg - 2))
            + (pg - 2) / D * (P.q * math.log(c.C_q) - math.log(P.q))
            + (2 - qg) / D * (P.p * math.log(c.C_p) - math.log(P.p)))
    return math.exp(logB)


def dense_scan_roots(P, h, c, n=1_000_000):
    """Sign changes of w_a on a 10^6-point log grid, refined by bisection."""
    rs = np.geomspace(1e-8, 1e8, n)
    vals = oracle_w(rs, P, h, c)
    idx = np.nonzero(np.diff(np.sign(vals)))[0]
    roots = []
    for i in idx:
        lo, hi = rs[i], rs[i + 1]
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if (oracle_w(mid, P, h, c) > 0) == (vals[i] > 0):
                lo = mid
            else:
                hi = mid
        roots.append(0.5 * (lo + hi))
    return roots


INSTANCES = [
    (desk_params(), 1.0),
    (ProblemParams(N=2, a=0.7, epsilon=0.1, eta=2.0, p=5.0, q=3.0), 1.5),
    (ProblemParams(N=3, a=0.3, epsilon=0.1, eta=1.0, p=4.0, q=2.5), 1.0),
    (ProblemParams(N=3, a=0.5, epsilon=0.1, eta=1.0, p=6.0, q=3.0), 1.0),
]


@pytest.fixture(scope="module", params=range(len(INSTANCES)), ids=["desk", "N2", "N3", "N3crit"])
def instance(request):
    P, h = INSTANCES[request.param]
    return P, h, Constants.for_params(P)


def test_r0_is_root_of_derivative(instance):
    P, h, c = instance
    rc = r0(P, h, c)
    root = brentq(lambda r: oracle_w_prime(r, P, h, c), rc / 10, rc * 10, xtol=1e-300, rtol=1e-15)
    assert rc == pytest.approx(root, rel=1e-10)
    assert w_a_prime(rc, P, h, c) == pytest.approx(0.0, abs=1e-8 * abs(oracle_w_prime(rc / 2, P, h, c)))


def test_maximum_value_formula(instance):
    P, h, c = instance
    rc = r0(P, h, c)
    assert w_max_closed_form(P, h, c) == pytest.approx(oracle_w(rc, P, h, c), rel=1e-10)
    assert coefficient_B(P, h, c) == pytest.approx(log_domain_B(P, c), rel=1e-12)


def test_roots_match_dense_scan(instance):
    P, h, c = instance
    R0, R1 = find_R0_R1(P, h, c)
    roots = dense_scan_roots(P, h, c)
    assert len(roots) == 2
    assert R0 == pytest.approx(roots[0], rel=1e-8)
    assert R1 == pytest.approx(roots[1], rel=1e-8)
    assert R0 < r0(P, h, c) < R1


def test_w_and_g_agree_with_oracle(instance):
    P, h, c = instance
    rs = np.geomspace(1e-3, 1e3, 50)
    assert np.allclose(w_a(rs, P, h, c), oracle_w(rs, P, h, c), rtol=1e-13, atol=1e-13)
    assert np.allclose(g_a(rs, P, h, c), rs**2 * oracle_w(rs, P, h, c), rtol=1e-12)


def test_w_rejects_nonpositive_radius():
    P = desk_params()
    with pytest.raises(ValueError):
        w_a(0.0, P, 1.0, Constants.for_params(P))


def test_desk_regression_values():
    rep = compute_landscape(desk_params(), 1.0)
    assert rep.r0 == pytest.approx(3.846402714, rel=1e-9)
    assert rep.R0 == pytest.approx(0.03608756815, rel=1e-9)
    assert rep.R1 == pytest.approx(409.9698206, rel=1e-9)
    assert rep.mass_condition and rep.critical_condition
    assert rep.critical_margin == math.inf


def test_mass_condition_fails_for_inflated_mass():
    P = desk_params(a=0.5e6)
    ok, margin = check_mass_condition(P, 1.0, Constants.for_params(P))
    assert not ok and margin < 0
    rep = compute_landscape(P, 1.0)
    assert rep.R0 is None
    with pytest.raises(NoRoots):
        rep.profile
    with pytest.raises(NoRoots):
        find_R0_R1(P, 1.0, Constants.for_params(P))


def test_expanded_critical_condition_matches_r0_form():
    for eta in (1e-3, 1.0, 1e3, 1e40):
        P = ProblemParams(N=3, a=0.5, epsilon=0.1, eta=eta, p=6.0, q=3.0)
        c = Constants.for_params(P)
        lhs, rhs = critical_condition_sides(P, 1.0, c)
        bound = eta ** (-0.25) * c.S ** 0.75
        assert lhs / rhs == pytest.approx(r0(P, 1.0, c) / bound, rel=1e-10)
        assert check_critical_condition(P, 1.0, c)[0] == (lhs < rhs)
    assert not check_critical_condition(P, 1.0, c)[0]


def test_critical_condition_implied_by_mass_condition_at_its_boundary():
    # at p = 2*, the ratio of the expanded sides is scale-free along the mass boundary
    for q in (2.1, 2.5, 3.0):
        def excess(log_eta):
            P = ProblemParams(N=3, a=0.5, epsilon=0.1, eta=10**log_eta, p=6.0, q=q)
            c = Constants.for_params(P)
            ok, margin = check_mass_condition(P, 1.0, c)
            return margin
        log_eta = brentq(excess, -20, 100)
        P = ProblemParams(N=3, a=0.5, epsilon=0.1, eta=10**log_eta, p=6.0, q=q)
        lhs, rhs = critical_condition_sides(P, 1.0, Constants.for_params(P))
        assert lhs < rhs


def test_report_text_round_trip():
    rep = compute_landscape(desk_params(), 1.0)
    again = LandscapeReport.from_text(rep.to_text())
    assert again == rep
    assert "mass_condition = true" in rep.to_text()


PROFILE = TruncationProfile(0.5, 2.0)


def test_tau_plateaus_and_monotonicity():
    rs = np.linspace(0.0, 3.0, 3001)
    t = tau(rs, PROFILE)
    assert np.all(t[rs <= 0.5] == 1.0)
    assert np.all(t[rs >= 2.0] == 0.0)
    assert np.all(np.diff(t) <= 0)
    assert tau(1.25, PROFILE) == pytest.approx(0.5)
    assert tau(7.0, None) == 1.0 and tau_prime(7.0, None) == 0.0


def test_tau_prime_matches_central_differences():
    rs = np.linspace(0.55, 1.95, 57)
    d = 1e-6
    fd = (tau(rs + d, PROFILE) - tau(rs - d, PROFILE)) / (2 * d)
    assert np.allclose(tau_prime(rs, PROFILE), fd, rtol=1e-6, atol=1e-9)
    assert tau_prime(0.3, PROFILE) == 0.0 and tau_prime(2.5, PROFILE) == 0.0


def test_truncated_envelope_stays_positive_beyond_R0():
    P = desk_params()
    c = Constants.for_params(P)
    R0, R1 = find_R0_R1(P, 1.0, c)
    prof = TruncationProfile(R0, R1)
    rs = np.geomspace(R0 * 1.0001, R1 * 100, 2000)
    assert np.all(g_bar(rs, P, 1.0, c, prof) > 0)
    small = np.geomspace(R0 * 1e-3, R0 * 0.999, 200)
    assert np.all(g_bar(small, P, 1.0, c, prof) < 0)


def test_truncation_profile_validation():
    with pytest.raises(ValueError):
        TruncationProfile(2.0, 1.0)


@settings(max_examples=60, deadline=None)
@given(a=st.floats(0.05, 2.0), eta=st.floats(0.05, 5.0))
def test_roots_bracket_r0_whenever_mass_condition_holds(a, eta):
    P = desk_params(a=a, eta=eta)
    c = Constants.for_params(P)
    ok, _ = check_mass_condition(P, 1.0, c)
    if not ok:
        return
    R0, R1 = find_R0_R1(P, 1.0, c)
    assert R0 < r0(P, 1.0, c) < R1
    assert abs(w_a(R0, P, 1.0, c)) < 1e-12 and abs(w_a(R1, P, 1.0, c)) < 1e-12
