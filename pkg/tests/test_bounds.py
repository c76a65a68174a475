import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from maxweight_lab.bounds import (BoundReport, TailBoundConstants, excursion_bound, gamma,
                                  iq_ratio_bound_check, iq_tail_bound, k_bar, ldp_objective,
                                  ldp_theta_upper, ltilde_drift_bound, maximal_inequality_bound,
                                  nu_bar, nu_max, r_symmetric, relative_entropy,
                                  stationary_tail_bound, excursion_level_for, iq_heuristic_exponent)
from maxweight_lab.errors import InvalidParameterError
from maxweight_lab.model import build_iq_schedule_set

from oracles import ldp_objective_mp, matching_weight, nu_bar_enumerated


def test_nu_bar_examples():
    assert nu_bar([0.5, 0.5], 1) == pytest.approx(0.5 + 0.25 * math.sqrt(2), abs=1e-12)
    assert nu_bar([0, 0, 0], 1) == 0
    assert nu_bar([1, 0, 0, 0], 2) == pytest.approx(1)


@given(st.lists(st.floats(0, 1), min_size=1, max_size=8), st.sampled_from([0.5, 1.0, 2.0]))
def test_nu_bar_matches_enumeration(lam, alpha):
    assert nu_bar(lam, alpha) == pytest.approx(nu_bar_enumerated(lam, alpha), abs=1e-12)


def test_nu_bar_large_network_is_exact():
    lam = np.full(36, 0.1)
    # sum of arrivals is Binomial(36, 0.1)
    ref = sum(math.comb(36, k) * 0.1 ** k * 0.9 ** (36 - k) * k ** 0.5 for k in range(37))
    assert nu_bar(lam, 1.0) == pytest.approx(ref, rel=1e-12)


def test_gamma_examples():
    assert gamma(0.5, 4, 1) == pytest.approx(0.125)
    assert gamma(1 - 1e-9, 4, 1) < 1e-9
    assert gamma(0, 1, 1) == 0.5
    with pytest.raises(InvalidParameterError):
        gamma(1.0, 4, 1)


def test_constants_invariants():
    c = TailBoundConstants.for_network(np.full(4, 0.2), 0.8, 0.5, 3.0)
    assert c.gamma == pytest.approx(0.2 / (2 * 4 ** (0.5 / 1.5)))
    assert c.nu_max == pytest.approx(5 * 4 ** (1 / 1.5))
    assert nu_max(4, 1) == 2


def test_tail_bound_examples():
    c = TailBoundConstants(nu_bar=0.7, gamma=0.1, nu_max=2, B=3)
    t, p = stationary_tail_bound(0, c, 1, 4)
    assert t == 3 and p == pytest.approx(0.7 / 0.8)
    lam = np.full(4, 0.125)
    c = TailBoundConstants.for_network(lam, 0.5, 1, 0.0)
    assert c.gamma == pytest.approx(0.125)
    t, p = stationary_tail_bound(10, c, 1, 4)
    nb = nu_bar_enumerated(lam, 1)
    assert t == pytest.approx(40) and p == pytest.approx((nb / (nb + 0.125)) ** 11)
    huge = TailBoundConstants(nu_bar=0.7, gamma=1e12, nu_max=2, B=3)
    assert stationary_tail_bound(3, huge, 1, 4)[1] < 1e-40
    t, p = stationary_tail_bound(2, TailBoundConstants(0.7, 0.1, 10, 5), 0.5, 4)
    assert t == pytest.approx(5 + 20 * 4 ** (1 / 1.5))
    assert p == pytest.approx((3.5 / 3.6) ** 3)


@given(st.integers(0, 30), st.floats(0.01, 1), st.floats(0.01, 1), st.sampled_from([0.5, 1.0, 2.0]))
def test_tail_bound_monotonicity(ell, nb, g, alpha):
    c = TailBoundConstants(nb, g, 1, 0)
    p = stationary_tail_bound(ell, c, alpha, 4, raw=True)[1]
    assert stationary_tail_bound(ell + 1, c, alpha, 4, raw=True)[1] < p
    assert stationary_tail_bound(ell, TailBoundConstants(nb, g * 1.5, 1, 0), alpha, 4, raw=True)[1] < p
    assert stationary_tail_bound(ell, TailBoundConstants(nb * 1.5, g, 1, 0), alpha, 4, raw=True)[1] > p


def test_k_bar_convention():
    assert k_bar(1, 4) == 8
    assert k_bar(2, 4) == pytest.approx(1 * 4 * 16 + 8)
    assert ltilde_drift_bound(1, 4, 0.3) == 8
    assert ltilde_drift_bound(2, 4, 0.5) == pytest.approx(72 / 0.5)
    with pytest.raises(InvalidParameterError):
        k_bar(0.5, 4)


def test_excursion_examples():
    assert excursion_bound(100, 50, 1, 4, 0.5) == pytest.approx(0.64)
    assert excursion_bound(100, 1e9, 1, 4, 0.5) < 1e-12
    assert excursion_bound(0, 5, 1, 4, 0.5) == 0
    assert excursion_bound(500, 40, 1, 4, 0.8) == 1.0
    assert excursion_bound(500, 40, 1, 4, 0.8, raw=True) == pytest.approx(5.0)
    assert excursion_bound(500, 200, 1, 4, 0.8) == pytest.approx(0.2)
    with pytest.raises(InvalidParameterError):
        excursion_bound(10, 5, 0.5, 4, 0.5)


@given(st.integers(1, 10**4), st.floats(1, 1e3), st.sampled_from([1.0, 1.5, 2.0]), st.floats(0, 0.95))
def test_excursion_scaling(T, b, alpha, rho):
    base = excursion_bound(T, b, alpha, 4, rho, raw=True)
    assert excursion_bound(2 * T, b, alpha, 4, rho, raw=True) == pytest.approx(2 * base, rel=1e-12)
    assert excursion_bound(T, 2 * b, alpha, 4, rho, raw=True) == pytest.approx(base / 2 ** (alpha + 1), rel=1e-12)


def test_excursion_level_inverts_bound():
    b = excursion_level_for(0.5, 500, 2, 4, 0.8)
    assert excursion_bound(500, b, 2, 4, 0.8, raw=True) == pytest.approx(0.5)


def test_iq_tail_bound_examples():
    assert iq_tail_bound(0, 2, 0.8, 1, 0)[1] == pytest.approx(1 / 1.05)
    assert iq_tail_bound(1, 1, 0.0, 1, 0)[1] == pytest.approx((1 / 1.5) ** 2)
    p5, p6 = iq_tail_bound(5, 2, 0.8, 1, 0)[1], iq_tail_bound(6, 2, 0.8, 1, 0)[1]
    assert p6 / p5 == pytest.approx(1 / 1.05)
    assert iq_heuristic_exponent(2, 0.8, 1) < 0


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
def test_iq_thresholds_consistent_with_general(alpha):
    m, M = 3, 9
    c = TailBoundConstants(0.5, 0.1, 1, 2.0)
    for ell in range(5):
        assert iq_tail_bound(ell, m, 0.5, alpha, 2.0)[0] == pytest.approx(stationary_tail_bound(ell, c, alpha, M)[0])


def test_relative_entropy_examples():
    lam = np.full((2, 2), 0.3)
    assert relative_entropy(lam, lam) == 0
    assert relative_entropy([0.5], [0.25]) == pytest.approx(0.5 * math.log(2) + 0.5 * math.log(2 / 3))
    assert relative_entropy([0.5], [0.0]) == math.inf
    assert relative_entropy([0.5], [1.0]) == math.inf
    assert relative_entropy([0.0, 1.0], [0.0, 1.0]) == 0
    rng = np.random.default_rng(0)
    for _ in range(1000):
        a, b = rng.random(4), rng.uniform(0.01, 0.99, 4)
        assert relative_entropy(a, b) >= 0


@given(st.lists(st.floats(0.01, 0.99), min_size=4, max_size=4),
       st.lists(st.floats(0.01, 0.99), min_size=4, max_size=4))
def test_relative_entropy_zero_iff_equal(a, b):
    h = relative_entropy(a, b)
    assert (h == 0) == (a == b)
    assert relative_entropy(a, a) == 0


def test_r_symmetric_examples():
    assert r_symmetric(0.1, 7, 1) == pytest.approx(0.1)
    assert r_symmetric(0.3, 1, 2.5) == pytest.approx(0.3)
    assert r_symmetric(0.2, 4, 3) == pytest.approx(0.1)


def test_ldp_objective_examples():
    assert ldp_objective(1e-6, 4, 0.9, 1) > 1e3
    assert ldp_objective(0.05, 4, 0.95, 1) == pytest.approx(ldp_objective_mp(0.05, 4, 0.95, 1), abs=1e-12)
    for e in np.linspace(1e-3, 3 - 1e-3, 200):
        v = ldp_objective(e, 4, 0.9, 1)
        assert math.isfinite(v) and v > 0
    with pytest.raises(InvalidParameterError):
        ldp_objective(3.0, 4, 0.9, 1)


def test_ldp_theta_examples():
    assert ldp_theta_upper(4, 0.9, 1).theta_approx == pytest.approx(0.8)
    res = ldp_theta_upper(8, 0.99, 1)
    assert abs(res.eps_star - 0.01) / 0.01 <= 0.25
    for m in (4, 8):
        for rho in (0.95, 0.97, 0.99):
            r = ldp_theta_upper(m, rho, 1)
            assert r.theta_numeric <= 1.5 * r.theta_approx
            # a minimum over eps can only improve on any grid value
            grid = min(ldp_objective(e, m, rho, 1) for e in np.linspace(1e-4, m - 1.001, 500))
            assert r.theta_numeric <= grid + 1e-9


def test_iq_ratio_bound_examples():
    S = build_iq_schedule_set(2)
    assert iq_ratio_bound_check([[1, 0], [0, 1]], 1, S)
    assert iq_ratio_bound_check(np.zeros((2, 2)), 1, S)


@given(st.lists(st.integers(0, 100), min_size=9, max_size=9), st.sampled_from([0.5, 1.0, 2.0]))
def test_iq_ratio_bound_fuzz(q, alpha):
    assert iq_ratio_bound_check(np.reshape(q, (3, 3)), alpha, build_iq_schedule_set(3))


def test_iq_ratio_uses_true_matching_weight():
    from maxweight_lab.policy import w_alpha
    rng = np.random.default_rng(5)
    S = build_iq_schedule_set(3)
    for Q in rng.integers(0, 50, (50, 3, 3)):
        assert w_alpha(Q.ravel(), 1.5, S) == pytest.approx(matching_weight(Q, 1.5), rel=1e-12)


def test_maximal_inequality_bound():
    assert maximal_inequality_bound(8, 100, 1600) == pytest.approx(0.5)
    assert maximal_inequality_bound(8, 100, 1) == 1.0


def test_bound_report():
    r = BoundReport("x", theoretical=0.5, empirical=0.4)
    assert r.satisfied
    assert not BoundReport("x", 0.5, 0.6).satisfied
    assert BoundReport("x", 0.5, 0.6, standard_error=0.05, tolerance_se=3).satisfied
    assert BoundReport("x", 0.5).satisfied is None
    d = r.to_dict()
    assert d["bound_name"] == "x" and d["satisfied"] is True
