import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mdaopt.core import UsageError
from mdaopt.schedules import (
    ScheduleSpec,
    alpha_prop1,
    alpha_reg,
    beta,
    effective_lr,
    lam,
    momentum_schedule,
    nesterov_betas,
    scan_alpha_inequalities,
)

ks = st.integers(0, 10**7)
etas = st.floats(1e-3, 1e3)


def test_beta_values():
    assert beta(0) == 1.0
    assert beta(3) == 2.0
    assert beta(99) == 10.0


def test_lambda_values():
    assert lam(0, 0.5) == 0.5
    assert lam(3, 1.0) == 2.0
    assert lam(8, 2.0) == 6.0


def test_alpha_reg_first_value():
    assert alpha_reg(0, 1.0) == pytest.approx((math.sqrt(2) - 1) / math.sqrt(2), rel=1e-15)
    assert alpha_reg(0, 1.0) == pytest.approx(0.2928932, abs=1e-7)


def test_alpha_reg_large_k_asymptote():
    # sqrt(k+2) - sqrt(k+1) ~ 1/(2 sqrt(k+2)), so alpha_k ~ 1/(2 eta (k+2)):
    # the decay is harmonic, with a factor one half in front
    k = 10**6
    target = 1 / (2 * (k + 2))
    assert abs(alpha_reg(k, 1.0) - target) <= 0.03 * target
    assert alpha_reg(k, 1.0) * (k + 2) == pytest.approx(0.5, rel=1e-5)


def test_alpha_reg_matches_direct_formula_where_stable():
    for k in range(50):
        direct = (math.sqrt(k + 2) - math.sqrt(k + 1)) / (0.7 * math.sqrt(k + 2))
        assert alpha_reg(k, 0.7) == pytest.approx(direct, rel=1e-12)


@given(ks, etas)
def test_alpha_reg_halves_when_eta_doubles(k, eta):
    assert alpha_reg(k, 2 * eta) == pytest.approx(alpha_reg(k, eta) / 2, rel=1e-14)


@given(ks, etas)
def test_alpha_reg_below_half_harmonic(k, eta):
    assert alpha_reg(k, eta) <= 1 / (2 * eta * (k + 1))


@given(st.integers(0, 10**6), etas)
def test_alpha_reg_decreasing(k, eta):
    assert alpha_reg(k + 1, eta) < alpha_reg(k, eta)


def test_alpha_reg_array_matches_scalar():
    k = np.arange(20)
    np.testing.assert_allclose(alpha_reg(k, 0.3), [alpha_reg(int(i), 0.3) for i in k], rtol=1e-15)


def test_alpha_prop1_start_and_first_step():
    assert alpha_prop1(0) == 0.0
    assert alpha_prop1(1) == pytest.approx(0.2928932, abs=1e-7)


def test_alpha_prop1_offset_from_alpha_reg():
    for k in range(1, 1001):
        assert alpha_prop1(k) == pytest.approx(alpha_reg(k - 1, 1.0), rel=1e-9)


def test_alpha_prop1_accepts_sequences():
    betas = [1.0, 3.0, 4.0]
    lams = [1.0, 0.5, 2.0]
    assert alpha_prop1(1, betas, lams) == 4.0
    assert alpha_prop1(2, betas, lams) == 0.5
    with pytest.raises(UsageError):
        alpha_prop1(-1)


def test_effective_lr():
    for k in range(10):
        assert effective_lr(k, lam(k, 0.3), beta(k)) == pytest.approx(0.3, rel=1e-15)
    assert effective_lr(0, 0.5, 1.0) == 0.5
    with pytest.raises(UsageError):
        effective_lr(0, 1.0, 0.0)


def test_effective_lr_follows_stagewise_drop():
    spec = ScheduleSpec(base_lr=1.0, lr_shape="stagewise", total_steps=100, stages=((0.5, 0.5, 0.0),))
    e = [effective_lr(k, lam(k, spec.eta(k)), beta(k)) for k in range(100)]
    assert e[49] == pytest.approx(1.0)
    assert e[50] == pytest.approx(0.5)


def test_nesterov_betas():
    b = nesterov_betas(5)
    assert b[0] == 1.0 and b[1] == 2.0 and b[2] == 2.5
    assert np.all(np.diff(b) > 0)


def test_momentum_compensation():
    on = dict(base_lr=1.0, lr_shape="stagewise", total_steps=100, c0=0.1, compensate_momentum=True, stages=((0.5, 0.1, 0.0),))
    spec = ScheduleSpec(**on)
    assert momentum_schedule(spec, 0) == pytest.approx(0.1)
    assert momentum_schedule(spec, 60) == pytest.approx(1.0)
    spec2 = ScheduleSpec(**{**on, "stages": ((0.5, 0.01, 0.0),)})
    assert momentum_schedule(spec2, 60) == 1.0
    off = ScheduleSpec(**{**on, "compensate_momentum": False})
    assert {momentum_schedule(off, k) for k in range(100)} == {0.1}


def test_schedule_shapes():
    assert ScheduleSpec(lr_shape="inv_sqrt_t", total_steps=400).eta(17) == 0.05
    w = ScheduleSpec(base_lr=1.0, lr_shape="warmup_linear_decay", total_steps=10, warmup_steps=2)
    np.testing.assert_allclose(w.etas(), [0.5, 1.0, 1.0, 0.875, 0.75, 0.625, 0.5, 0.375, 0.25, 0.125])
    ramp = ScheduleSpec(base_lr=1.0, lr_shape="stagewise", total_steps=100, stages=((0.5, 0.1, 0.1),))
    assert ramp.eta(49) == 1.0
    assert ramp.eta(55) == pytest.approx(0.55)
    assert ramp.eta(60) == pytest.approx(0.1)


@pytest.mark.parametrize(
    "kw",
    [dict(lr_shape="cosine"), dict(base_lr=0.0), dict(c0=0.0), dict(total_steps=0), dict(lr_shape="stagewise", stages=((0.5, -1.0, 0.0),))],
)
def test_schedule_rejects_bad_fields(kw):
    with pytest.raises(UsageError):
        ScheduleSpec(**kw)


@pytest.mark.parametrize("eta", [0.1, 1.0, 10.0])
def test_inequality_scan_clean(eta):
    assert sum(scan_alpha_inequalities(eta, 100_000).values()) == 0
