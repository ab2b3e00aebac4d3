import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from occufluct.regimes import (ExtinctionKind, HighDensityCondition,
                               LimitProcess, ModelParams, RegimeCase,
                               classify_regime, critical_dimension,
                               dependence_exponent_formula,
                               extinction_classification, norming_factor,
                               selfsim_index_lowdim)


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(1, 2.5, 1, 0)
    with pytest.raises(ValueError):
        ModelParams(1, 2, 1.5, 0)
    with pytest.raises(ValueError):
        ModelParams(1, 2, 1, -0.1)
    with pytest.raises(ValueError):
        ModelParams(0, 2, 1, 0)
    with pytest.raises(ValueError):
        ModelParams(1, 2, 1, 0, v_rate=0)


def test_critical_dimension_values():
    assert critical_dimension(ModelParams(3, 2, 1, 0))[0] == 4.0
    assert critical_dimension(ModelParams(3, 1, 0.5, 1.5))[0] == pytest.approx(2.0)
    assert critical_dimension(ModelParams(3, 2, 1, 0))[1] == pytest.approx(3.0)


def test_interpolation_endpoints():
    # gamma <= alpha: interior threshold stays at alpha(1+beta)/beta;
    # past alpha it decreases continuously in gamma, and the critical
    # boundary meets the diagonal d = gamma exactly at the finite-measure
    # threshold alpha(2+beta)/(1+beta)
    a, b = 1.2, 0.7
    for g in np.linspace(0, a, 7):
        assert critical_dimension(ModelParams(3, a, b, g))[0] == (
            pytest.approx(a * (1 + b) / b))
    gs = np.linspace(a + 1e-6, 4.0, 60)
    vals = [critical_dimension(ModelParams(6, a, b, g))[0] for g in gs]
    assert np.all(np.diff(vals) < 0)
    # fixed point of d_c(gamma) = gamma
    fixed = a * (2 + b) / (1 + b)
    assert critical_dimension(ModelParams(6, a, b, fixed))[0] == (
        pytest.approx(fixed))


def test_classify_examples():
    r = classify_regime(ModelParams(3, 2, 1, 0))
    assert r.case_id is RegimeCase.LOWDIM_GAMMA_LT_D
    assert r.f_t_exponents.t_power == pytest.approx(1.5)
    assert r.limit_process_id is LimitProcess.XI
    assert norming_factor(r, 1e4, 1.0) == pytest.approx(1000.0)

    r = classify_regime(ModelParams(4, 2, 1, 0))
    assert r.case_id is RegimeCase.CRIT_A
    assert (r.f_t_exponents.t_power, r.f_t_exponents.log_power) == (1.0, 1.0)

    r = classify_regime(ModelParams(5, 2, 1, 1))
    assert r.case_id is RegimeCase.HIGH_A
    assert r.f_t_exponents.t_power == pytest.approx(0.5)
    assert r.f_t_exponents.log_power == 0.0


def test_classify_critical_subbranches():
    assert classify_regime(ModelParams(4, 2, 1, 2)).case_id is RegimeCase.CRIT_B_I
    # alpha < gamma < d with d on the interpolated boundary
    p = ModelParams(1, 0.6, 1, 0.8)
    assert classify_regime(p).case_id is RegimeCase.CRIT_B_II
    p = ModelParams(1, 2 / 3, 1, 1.0)
    assert classify_regime(p).case_id is RegimeCase.CRIT_B_III
    p = ModelParams(1, 2 / 3, 1, 1.5)
    assert classify_regime(p).case_id is RegimeCase.CRIT_B_IV
    assert classify_regime(p).limit_process_id is LimitProcess.VARTHETA


def test_norming_gamma_eq_d_carries_log():
    # gamma = d: F^2 = T^(2+beta-(1+beta)d/alpha) log(T), so at T = e^2
    # with d = 1, alpha = 2, beta = 1: F = sqrt(e^4 * 2)
    r = classify_regime(ModelParams(1, 2, 1, 1))
    assert r.case_id is RegimeCase.LOWDIM_GAMMA_GE_D
    T = math.e ** 2
    assert norming_factor(r, T, 1.0) == pytest.approx(math.sqrt(T ** 2 * 2.0))
    # gamma > d drops the log
    r2 = classify_regime(ModelParams(1, 2, 1, 1.5))
    assert norming_factor(r2, T, 1.0) == pytest.approx(T)


def test_norming_rejects_bad_T():
    r = classify_regime(ModelParams(3, 2, 1, 0))
    with pytest.raises(ValueError):
        norming_factor(r, 1.0)
    with pytest.raises(ValueError):
        norming_factor(r, 0.5)


def test_norming_multiplicative_in_H():
    for p in (ModelParams(3, 2, 1, 0), ModelParams(1, 2, 1, 1),
              ModelParams(4, 2, 1, 2), ModelParams(5, 2, 1, 1),
              ModelParams(1, 0.4, 1, 0.9)):
        r = classify_regime(p)
        b = p.beta
        f1 = norming_factor(r, 50.0, 1.0)
        f9 = norming_factor(r, 50.0, 9.0)
        assert f9 / f1 == pytest.approx(9.0 ** (1 / (1 + b)))


def test_high_density_examples():
    r = classify_regime(ModelParams(3, 2, 1, 0))
    assert not r.hd_required
    assert r.density_condition.evaluate_schedule(0.0, 0.0)

    r = classify_regime(ModelParams(1, 2, 1, 0))
    assert r.hd_required
    assert not r.density_condition.evaluate_schedule(0.0, 0.0)
    assert r.density_condition.evaluate_schedule(1.0, 0.0)   # H_T = T passes

    r = classify_regime(ModelParams(1, 0.4, 1, 0.9))  # High_C at d = 1
    assert r.case_id is RegimeCase.HIGH_C
    assert not r.density_condition.evaluate_schedule(1.0, 0.0)   # T fails
    assert r.density_condition.evaluate_schedule(1.5, 0.0)       # T^1.5 passes


def test_h1_sufficient_iff_above_threshold():
    # Low-dimension case: H_T = 1 works exactly when d > alpha/beta + gamma
    for (d, a, b, g) in [(3, 2, 1, 0), (1, 2, 1, 0), (2, 2, 1, 0),
                         (3, 2, 1, 0.5), (5, 1.7, 0.9, 0.3)]:
        p = ModelParams(d, a, b, g)
        r = classify_regime(p)
        if r.case_id is RegimeCase.LOWDIM_GAMMA_LT_D:
            assert r.density_condition.h1_sufficient == (d > a / b + g)


def test_selfsim_index_examples():
    assert selfsim_index_lowdim(ModelParams(3, 2, 1, 0)) == pytest.approx(0.75)
    assert selfsim_index_lowdim(ModelParams(1, 2, 1, 0)) == pytest.approx(1.25)
    assert selfsim_index_lowdim(ModelParams(1, 2, 1, 0.5)) == pytest.approx(1.125)
    # consistency with the T-exponent of F_T at H_T = 1
    for p in (ModelParams(3, 2, 1, 0), ModelParams(2, 1.5, 0.7, 0.4)):
        r = classify_regime(p)
        if r.case_id is RegimeCase.LOWDIM_GAMMA_LT_D:
            assert r.selfsim_index == pytest.approx(
                r.f_t_exponents.t_power / (1 + p.beta))


def test_dependence_exponent_formula():
    assert dependence_exponent_formula(ModelParams(1, 2, 1, 0)) == 0.5
    assert dependence_exponent_formula(ModelParams(1, 1.5, 0.2, 0)) == (
        pytest.approx((1 / 1.5) * (1.2 - 0.4)))
    assert dependence_exponent_formula(ModelParams(1, 1.5, 0.9, 0)) == (
        pytest.approx(1 / 1.5))
    # gamma -> d makes the two regimes merge at kappa = d/alpha
    p = ModelParams(2, 1.5, 0.19, 2 - 1e-9)
    assert dependence_exponent_formula(p) == pytest.approx(2 / 1.5, rel=1e-6)


def test_extinction_examples():
    assert extinction_classification(ModelParams(1, 2, 1, 0)).kind is (
        ExtinctionKind.AS_LOCAL_EXTINCTION_PROVED)
    assert extinction_classification(ModelParams(3, 2, 1, 0)).kind is (
        ExtinctionKind.NO_AS_LOCAL_EXTINCTION)
    assert extinction_classification(ModelParams(1, 1.5, 0.5, 0)).kind is (
        ExtinctionKind.CONJECTURED_AS_LOCAL_EXTINCTION)
    assert extinction_classification(ModelParams(1, 2, 1, 1.5)).kind is (
        ExtinctionKind.GLOBAL_FINITE_EXTINCTION)
    assert extinction_classification(ModelParams(3, 1.5, 1, 2)).kind is (
        ExtinctionKind.FINITE_TOTAL_OCCUPATION)
    rep = extinction_classification(ModelParams(2, 1.5, 0.5, 0.5))
    assert rep.threshold == pytest.approx(1.5 / 0.5 + 0.5)


_params = st.tuples(
    st.floats(1.0, 8.0), st.floats(0.05, 2.0), st.floats(0.05, 1.0),
    st.floats(0.0, 9.0))


@given(_params)
@settings(max_examples=500, deadline=None)
def test_classification_total_and_unique(t):
    d, a, b, g = t
    p = ModelParams(d, a, b, g)
    r = classify_regime(p)
    assert r.case_id is not RegimeCase.UNCLASSIFIED
    e = extinction_classification(p)
    assert isinstance(e.kind, ExtinctionKind)


def test_boundary_flips_low_critical_high():
    # perturbing d across the interior boundary flips low -> crit -> high
    a, b, g = 1.5, 0.8, 0.3
    d_c = critical_dimension(ModelParams(3, a, b, g))[0]
    lo = classify_regime(ModelParams(d_c - 1e-5, a, b, g))
    at = classify_regime(ModelParams(d_c, a, b, g))
    hi = classify_regime(ModelParams(d_c + 1e-5, a, b, g))
    assert lo.case_id is RegimeCase.LOWDIM_GAMMA_LT_D
    assert at.case_id in (RegimeCase.CRIT_A, RegimeCase.CRIT_B_I,
                          RegimeCase.CRIT_B_II)
    assert hi.case_id in (RegimeCase.HIGH_A, RegimeCase.HIGH_B,
                          RegimeCase.HIGH_C)


def test_non_integer_d_flagged():
    r = classify_regime(ModelParams(2.5, 2, 1, 0))
    assert "analytic continuation, not simulateable" in r.notes
    assert not ModelParams(2.5, 2, 1, 0).simulateable
