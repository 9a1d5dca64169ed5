import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mdaopt import experiments as ex
from mdaopt.analysis import (
    HypothesisViolation,
    BoundConstants,
    alpha_T,
    bracket_coefficient,
    check_descent_inequality,
    lyapunov_gamma,
    max_stepsize,
    mda_bound_rhs,
    rate_fit,
    regularized_bracket,
    sgd_bound_rhs,
)
from mdaopt.core import UsageError
from mdaopt.problems import logistic, quadratic
from mdaopt.schedules import alpha_prop1, alpha_reg, beta

cs = st.floats(0.05, 1.0)


def test_max_stepsize_values():
    assert max_stepsize(1, 0.5) == 1.0
    assert max_stepsize(1, 1) == 1.5
    for c in (0.1, 0.3, 0.9):
        assert max_stepsize(10, c) == pytest.approx(max_stepsize(1, c) / 10, rel=1e-15)
    with pytest.raises(UsageError):
        max_stepsize(1, 0)


def test_gamma_stationary_and_no_momentum():
    assert lyapunov_gamma(0.0, 0.0, 0.0, 0.3, 0.5, 0.5, 2.0) == 0.0
    eta, L = 0.2, 3.0
    assert lyapunov_gamma(1.5, 9.0, 0.4, eta, 1.0, 1.0, L) == pytest.approx(1.5 / eta**2 + L / (2 * eta) * 0.4)
    assert lyapunov_gamma(1.5, 9.0, 0.4, eta, 1.0, 1.0, L, form="lagged") == pytest.approx(1.5 / eta**2 + L / (2 * eta**2) * 0.4)


def test_descent_one_dimensional_quadratic():
    q = quadratic(n=1, condition_number=1.0)
    audit = check_descent_inequality(q, 0.1, 0.5, L=1.0, T=100)
    assert len(audit.records) == 100
    assert audit.violations == []


def test_descent_starting_at_minimizer():
    q = quadratic(n=3, condition_number=2.0)
    q.x0 = q.x_star.copy()
    audit = check_descent_inequality(q, 0.5, 0.5, T=20)
    assert all(r.inequality_lhs == 0.0 and r.residual >= 0.0 for r in audit.records)


@pytest.mark.parametrize("c", [0.1, 0.25, 0.5, 0.75, 1.0])
@pytest.mark.parametrize("frac", [0.25, 0.5, 1.0])
def test_descent_grid_quadratic_and_logistic(c, frac):
    for p in (quadratic(n=10, condition_number=1.0), quadratic(n=10, condition_number=10.0), logistic(batch=200)):
        audit = check_descent_inequality(p, frac * max_stepsize(p.L, c), c, T=500)
        assert audit.violations == []


def test_negative_control_detects_sign_flip():
    q = quadratic(n=10, condition_number=1.0)
    assert not check_descent_inequality(q, max_stepsize(1.0, 0.5), 0.5, T=200).bracket_sign_flip
    audit = check_descent_inequality(q, 1.5 * max_stepsize(1.0, 0.5), 0.5, T=200)
    assert audit.bracket_sign_flip


def test_constant_bracket_zero_on_boundary():
    # at c = 1/2 and eta = 1.5 * max the k-free bracket is exactly 0, so only
    # the k-dependent form can register the overshoot
    assert bracket_coefficient(1.5, 0.5, 1.0) == pytest.approx(0.0, abs=1e-15)
    k = np.arange(5)
    np.testing.assert_allclose(regularized_bracket(k, 1.5, 0.5, 1.0), 1 / (k + 1) / 1.5**2, rtol=1e-12)


@given(st.floats(0.5, 1.0), st.floats(0.01, 1.0), st.floats(0.1, 20.0), st.integers(0, 10**6))
def test_bracket_nonpositive_under_step_condition(c, frac, L, k):
    eta = frac * max_stepsize(L, c)
    scale = 1 / (eta * c) ** 2
    assert regularized_bracket(k, eta, c, L) <= 1e-12 * scale
    assert bracket_coefficient(eta, c, L) <= 1e-12 * scale


def test_forward_convention_fails_to_descend():
    # the 1/eta step weight with the forward-shifted indexing does not give a
    # valid per-step inequality; the audit must surface that, not hide it
    q = quadratic(n=1, condition_number=1.0)
    audit = check_descent_inequality(q, 0.1, 0.5, L=1.0, T=100, convention="forward")
    assert audit.violations


def test_descent_rejects_stochastic_problem():
    with pytest.raises(UsageError):
        check_descent_inequality(quadratic(sigma=1.0), 0.1, 0.5)


def test_alpha_T_closed_form_and_asymptote():
    for T in (1, 10, 400, 10**4):
        direct = math.sqrt(T) * (1 - math.sqrt(T + 1) / math.sqrt(T + 2))
        assert alpha_T(T) == pytest.approx(direct, rel=1e-9)
    assert alpha_T(10**4) == pytest.approx(0.005, rel=0.01)


def test_alpha_T_index_offset():
    for T in (4, 100, 10**4):
        eta = 1 / math.sqrt(T)
        assert alpha_T(T) == pytest.approx(alpha_reg(T, eta), rel=1e-12)
        assert alpha_T(T) == pytest.approx(alpha_prop1(T + 1, beta, lambda j: eta * beta(j)), rel=1e-9)


def _consts(**kw):
    base = dict(L=1.0, sigma_sq=0.0, R_sq=0.0, c=1.0, T=100, f_x0_gap=0.0, f_zT_gap=0.0, f_xT_gap=0.0)
    return BoundConstants(**{**base, **kw})


def test_bound_degenerate_case_nonpositive():
    assert mda_bound_rhs(_consts()).total <= 0.0


def test_bound_hypothesis_violation():
    with pytest.raises(HypothesisViolation):
        mda_bound_rhs(_consts(L=10.0, c=0.5, T=399))
    assert _consts(L=10.0, c=0.5, T=400).min_horizon == 400
    mda_bound_rhs(_consts(L=10.0, c=0.5, T=400))


def test_bound_terms_hand_values():
    T = 10_000
    t = mda_bound_rhs(_consts(L=2.0, sigma_sq=3.0, R_sq=0.5, c=0.5, T=T, f_x0_gap=4.0, f_zT_gap=1.0, f_xT_gap=1.0))
    assert t.progress == pytest.approx(2 * 3.0 / 100)
    assert t.momentum == pytest.approx(2 * 1.0 * (3.0 * 4.0 - (2.0 + alpha_T(T)) * 1.0) / T)
    assert t.noise == pytest.approx(2 * (2.0 / 100 + math.log(T + 1) / T) * 3.0)
    assert t.domain == pytest.approx(2 * (2.0 * math.log(T) / T + 2 * math.log(T) / 100) * 0.5)
    assert t.total == pytest.approx(t.progress + t.momentum + t.noise + t.domain)


def test_sgd_bound():
    assert sgd_bound_rhs(1.0, 1.0, 0.0, 100) == pytest.approx(0.1)
    assert sgd_bound_rhs(2.0, 3.0, 0.0, 400) == pytest.approx(sgd_bound_rhs(2.0, 3.0, 0.0, 100) / 2)
    assert sgd_bound_rhs(0.0, 5.0, 0.0, 50) == 0.0


def test_rate_fit_cases():
    assert rate_fit([(100, 0.1), (1e4, 0.01), (1e6, 0.001)]) == pytest.approx(-0.5, abs=1e-12)
    assert rate_fit([(10, 2.0), (100, 2.0), (1000, 2.0)]) == pytest.approx(0.0, abs=1e-12)
    assert rate_fit([(T, 3.0 / T) for T in (10, 100, 1000, 10_000)]) == pytest.approx(-1.0, abs=1e-12)
    with pytest.raises(UsageError):
        rate_fit([(10, 1.0), (100, 0.0), (1000, 1.0)])
    with pytest.raises(UsageError):
        rate_fit([(10, 1.0), (100, 0.5)])


@given(st.floats(-3, 3), st.floats(0.01, 100), st.lists(st.integers(1, 10**6), min_size=3, max_size=6, unique=True))
def test_rate_fit_recovers_exponent(p, scale, Ts):
    assert rate_fit([(T, scale * T**p) for T in Ts]) == pytest.approx(p, abs=1e-12)


def test_bound_soundness_short_horizon():
    res = ex.bound_soundness(quadratic(n=10, condition_number=10.0, sigma=1.0), c=0.5, T=400, seeds=range(3))
    assert res.holds
    assert len(res.per_seed_lhs) == 3
    assert res.constants.sigma_sq >= 1.0
