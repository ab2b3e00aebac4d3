import numpy as np
import pytest
from scipy import integrate

from occufluct.limits import kernels as K
from occufluct.limits import oracle as O
from occufluct.limits.grids import build_kernel_grid, refinement_check
from occufluct.limits.sampling import (sample_eta_increments, sample_vartheta,
                                       sample_xi_path, sample_zeta_path)
from occufluct.regimes import ModelParams
from occufluct.stable_core import StableMotionSpec, transition_density

from conftest import seeded


class TestKernels:
    def test_time_integrated_density_closed_forms(self):
        x = np.array([0.4, 1.0, 3.0])
        spec = StableMotionSpec(2, 1)
        got = K.time_integrated_density(2.0, 1.5, x, 1)
        ref = [integrate.quad(lambda w: float(
            transition_density(spec, w, np.array([xi]))[0]), 0, 1.5)[0]
            for xi in x]
        assert np.allclose(got, ref, rtol=1e-8)

    def test_gamma_zero_weight_is_time_integral(self):
        # g_0 = 1, so the kernel weight reduces to the time integral
        r, x, t = 0.3, np.array([0.7]), 1.0
        w = K.kernel_weight_xi(2.0, 1.0, 0.0, r, x, t)
        ref = K.time_integrated_density(2.0, t - r, x)
        assert w[0] == pytest.approx(ref[0], rel=1e-12)

    def test_weight_vanishes_past_t(self):
        w = K.kernel_weight_xi(2.0, 1.0, 0.0, 1.5, np.array([0.2]), 1.0)
        assert w[0] == 0.0

    def test_gamma_weight_vs_brute_force(self):
        # substituted Riemann oracle for g_gamma(1, 0), alpha = 2, gamma = 1/2
        tab = K.build_gamma_weight_table(2.0, 0.5, 1)
        u = np.linspace(1e-7, np.sqrt(60.0), 2_000_001)
        y = u ** 2                             # y = u^(1/(1-gamma)), gamma = 1/2
        p1 = np.exp(-(y ** 2) / 4.0) / np.sqrt(4 * np.pi)
        brute = 2.0 * np.trapezoid(2.0 * p1, u)   # dy |y|^-g = 2 du
        got = tab(np.array([1.0]), np.array([0.0]))[0]
        assert got == pytest.approx(brute, rel=1e-4)

    def test_gamma_weight_self_similarity(self):
        tab = K.build_gamma_weight_table(2.0, 0.5, 1)
        lhs = tab(np.array([4.0]), np.array([2.0]))[0]
        rhs = 4.0 ** (-0.25) * tab.g1(np.array([2.0 * 4 ** -0.5]))[0]
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_gamma_weight_far_field(self):
        tab = K.build_gamma_weight_table(2.0, 0.5, 1)
        assert tab.g1(np.array([200.0]))[0] == pytest.approx(200 ** -0.5,
                                                             rel=2e-3)


class TestGridsAndSampling:
    def test_grid_refinement_stable(self):
        params = ModelParams(1, 2, 1, 0)
        grid = build_kernel_grid(params, [0.5, 1.0], kind="xi")
        rel = refinement_check(grid, rel_tol=0.05)
        assert rel < 0.03

    def test_isometry_vs_quadrature_oracle(self):
        # discrete scale^(1+beta) matches the independent panel quadrature
        for (b, g) in ((1.0, 0.0), (1.0, 0.5), (0.5, 0.0)):
            params = ModelParams(1, 2, b, g)
            grid = build_kernel_grid(params, [1.0], kind="xi")
            disc = grid.scale_power(0)
            cont = O.marginal_scale_power(params, 1.0, kind="xi")
            assert disc == pytest.approx(cont, rel=0.01), (b, g)

    def test_xi_paths_start_at_zero_and_marginal(self):
        params = ModelParams(1, 2, 1, 0.5)
        rng = seeded(70)
        path = sample_xi_path(params, [0.5, 1.0], rng, n_paths=4000)
        assert np.all(path.values[:, 0] == 0.0)
        # beta = 1: variance of xi_1 = 2 * scale_power
        target = 2.0 * O.marginal_scale_power(params, 1.0, kind="xi")
        v = path.values[:, -1].var()
        assert v == pytest.approx(target, rel=0.08)

    def test_xi_requires_lowdim_case(self):
        rng = seeded(71)
        with pytest.raises(ValueError):
            sample_xi_path(ModelParams(5, 2, 1, 1), [1.0], rng)

    def test_zeta_variance_matches_isometry(self):
        params = ModelParams(1, 2, 1, 1.5)   # gamma irrelevant to the kernel
        rng = seeded(72)
        path = sample_zeta_path(params, [1.0], rng, n_paths=4000)
        target = 2.0 * O.marginal_scale_power(params, 1.0, kind="zeta")
        assert path.values[:, -1].var() == pytest.approx(target, rel=0.08)

    def test_zeta_selfsim_exponent(self):
        params = ModelParams(1, 2, 1, 1.5)
        r = O.selfsim_exponent_oracle(params, kind="zeta")
        assert r.numeric == pytest.approx(
            (2 + 1 - 2 * 1 / 2) / 2, abs=0.01)

    def test_zeta_rejects_high_d(self):
        rng = seeded(73)
        with pytest.raises(ValueError):
            sample_zeta_path(ModelParams(4, 2, 1, 5), [1.0], rng)

    def test_eta_increments(self):
        params = ModelParams(4, 2, 1, 1)     # Crit_A at d = 4
        rng = seeded(74)
        p = sample_eta_increments(params, [0.25, 0.5, 0.75, 1.0], rng,
                                  n_paths=20000)
        inc = np.diff(p.values, axis=1)
        t = p.times
        scales = np.diff(t ** (1 - 1 / 2))
        assert np.allclose(inc.var(axis=0), 2 * scales, rtol=0.06)
        # independence of disjoint increments
        c = np.corrcoef(inc[:, 0], inc[:, 2])[0, 1]
        assert abs(c) < 4 / np.sqrt(inc.shape[0])

    def test_eta_gamma0_stationary(self):
        params = ModelParams(4, 2, 1, 0)
        rng = seeded(75)
        p = sample_eta_increments(params, [0.5, 1.0], rng, n_paths=2000)
        inc = np.diff(p.values, axis=1)
        assert inc[:, 0].var() == pytest.approx(inc[:, 1].var(), rel=0.15)

    def test_eta_char_fn_beta_half(self):
        # displayed exponent at z = 1 for beta = 0.5, gamma = 1, alpha = 2
        params = ModelParams(6, 2, 0.5, 1)   # Crit_A: d = alpha(1+b)/b = 6
        rng = seeded(76)
        p = sample_eta_increments(params, [1.0], rng, n_paths=400_000)
        emp = np.mean(np.exp(1j * p.values[:, -1]))
        tau = np.tan(np.pi * 1.5 / 2)
        target = np.exp(-(1.0 ** (1 - 0.5)) * (1 - 1j * tau))
        assert abs(emp - target) < 0.01

    def test_vartheta(self):
        params = ModelParams(3, 2 / 3, 1, 1.5)
        rng = seeded(77)
        p = sample_vartheta(params, rng, n_paths=50000,
                            times=(0.5, 1.0, 2.0))
        assert np.all(p.values[:, 0] == 0)
        # exactly two distinct values per path
        assert np.all(p.values[:, 1] == p.values[:, 2])
        assert np.all(p.values[:, 1] == p.values[:, 3])
        # beta = 1: standard gaussian with variance 2
        assert p.values[:, 1].var() == pytest.approx(2.0, rel=0.03)


class TestCovarianceOracle:
    def test_zero_at_origin(self):
        params = ModelParams(3, 2, 1, 0)
        assert O.gaussian_covariance_oracle(params, 0.0, 1.0) == 0.0

    def test_refuses_beta_lt_1(self):
        with pytest.raises(ValueError):
            O.gaussian_covariance_oracle(ModelParams(3, 2, 0.5, 0), 0.5, 1.0)

    def test_sub_fractional_form_d3(self):
        params = ModelParams(3, 2, 1, 0)
        ts = [0.25, 0.5, 0.75, 1.0]
        C = np.array([[O.gaussian_covariance_oracle(params, s, t)
                       for t in ts] for s in ts])
        corr = C / np.sqrt(np.outer(np.diag(C), np.diag(C)))
        S = np.array([[O.sfbm_covariance(s, t, 1.5) for t in ts] for s in ts])
        corr_s = S / np.sqrt(np.outer(np.diag(S), np.diag(S)))
        assert np.abs(corr - corr_s).max() < 1e-2

    def test_variance_scaling_exponent(self):
        params = ModelParams(3, 2, 1, 0)
        c1 = O.gaussian_covariance_oracle(params, 1.0, 1.0)
        c2 = O.gaussian_covariance_oracle(params, 2.0, 2.0)
        slope = np.log(c2 / c1) / np.log(2.0) / 2.0
        assert slope == pytest.approx(0.75, abs=0.01)

    def test_xi_path_covariance_matches_oracle(self):
        params = ModelParams(1, 2, 1, 0)
        rng = seeded(78)
        path = sample_xi_path(params, [0.5, 1.0], rng, n_paths=6000)
        emp = float(np.mean(path.values[:, 1] * path.values[:, 2]))
        ora = O.gaussian_covariance_oracle(params, 0.5, 1.0)
        assert emp == pytest.approx(ora, rel=0.08)

    def test_increment_consistency_beta1(self):
        # Var(xi_t - xi_s) from the path equals the kernel-difference
        # quadrature (covariance identity)
        params = ModelParams(1, 2, 1, 0)
        rng = seeded(79)
        path = sample_xi_path(params, [0.5, 1.0], rng, n_paths=8000)
        inc = path.values[:, 2] - path.values[:, 1]
        css = O.gaussian_covariance_oracle(params, 0.5, 0.5)
        ctt = O.gaussian_covariance_oracle(params, 1.0, 1.0)
        cst = O.gaussian_covariance_oracle(params, 0.5, 1.0)
        assert inc.var() == pytest.approx(ctt + css - 2 * cst, rel=0.08)


class TestSelfsimOracle:
    @pytest.mark.parametrize("dabg,expected", [
        ((3, 2, 1, 0), 0.75),
        ((1, 2, 1, 0), 1.25),
        ((1, 2, 1, 0.5), 1.125),
        ((1, 1.5, 0.5, 0), (2 + 0.5 - 0.5 / 1.5) / 1.5),
        ((1, 2, 0.5, 0.25), (2.5 - 0.75 / 2) / 1.5),
        ((3, 2, 1, 0.5), (3 - 3.5 / 2) / 2),
    ])
    def test_two_methods_agree(self, dabg, expected):
        d, a, b, g = dabg
        r = O.selfsim_exponent_oracle(ModelParams(d, a, b, g))
        assert r.exponent == pytest.approx(expected, abs=1e-9)
        assert abs(r.numeric - r.kernel_scaling) < 1e-2

    def test_printed_sign_flagged(self):
        r = O.selfsim_exponent_oracle(ModelParams(1, 2, 1, 0.5))
        assert r.sign_discrepancy
        assert r.printed_statement != pytest.approx(r.exponent)


class TestHighDim:
    def test_riesz_constant_newtonian(self):
        from occufluct.limits.highdim import riesz_constant
        assert riesz_constant(2.0, 3) == pytest.approx(1 / (4 * np.pi))
        with pytest.raises(ValueError):
            riesz_constant(2.0, 2)

    def test_potential_matches_quad_d5(self):
        from occufluct.limits.highdim import potential_radial
        from occufluct.observables import GaussianBump
        params = ModelParams(5, 2, 1, 0)
        obs = GaussianBump((0, 0, 0, 0, 0), 1.0)
        # G phi(0) = int_0^infty T_t phi(0) dt with the closed Gaussian form
        ref = integrate.quad(
            lambda t: (1 / (1 + 2 * t)) ** 2.5, 0, np.inf)[0]
        got = potential_radial(params, obs, np.array([1e-6]))[0]
        assert got == pytest.approx(ref, rel=1e-3)

    def test_potential_d1_alpha_half(self):
        from occufluct.limits.highdim import potential_radial, riesz_constant
        from occufluct.observables import BallIndicator
        params = ModelParams(1, 0.5, 1, 0)
        obs = BallIndicator((0.0,), 1.0)
        c = riesz_constant(0.5, 1)
        ref = c * integrate.quad(lambda y: abs(0.5 - y) ** (-0.5)
                                 + abs(0.5 + y) ** (-0.5), 0, 1.0,
                                 points=[0.5], limit=200)[0]
        got = potential_radial(params, obs, np.array([0.5]))[0]
        assert got == pytest.approx(ref, rel=1e-3)

    def test_log_char_structure(self):
        from occufluct.limits.highdim import log_char_highdim
        from occufluct.observables import GaussianBump
        params = ModelParams(5, 2, 1, 1, v_rate=1.0)   # High_A
        obs = GaussianBump((0,) * 5, 1.0)
        assert log_char_highdim(params, obs, 0.7, 1.0, 1.0) == 0.0
        val = log_char_highdim(params, obs, 0.7, 2.0, 1.0)
        assert val.real < 0 and abs(val.imag) < 1e-12   # beta = 1: tan = 0
        # small-z quadratic with variance from the two integrals
        from occufluct.limits.highdim import highdim_char
        ch = highdim_char(params, obs)
        for z in (1e-2, 1e-3):
            lc = log_char_highdim(params, obs, z, 2.0, 1.0)
            factor = 2 ** 0.5 - 1.0
            pred = -factor * z ** 2 * (ch.stable_integral
                                       + 2 * ch.coupling_integral)
            assert lc.real == pytest.approx(pred, rel=1e-6)

    def test_superprocess_flag_drops_coupling(self):
        from occufluct.limits.highdim import log_char_highdim, highdim_char
        from occufluct.observables import GaussianBump
        params = ModelParams(5, 2, 1, 1, v_rate=1.0)
        obs = GaussianBump((0,) * 5, 1.0)
        ch = highdim_char(params, obs)
        z, t, s = 0.8, 2.0, 0.5
        full = log_char_highdim(params, obs, z, t, s)
        sup = log_char_highdim(params, obs, z, t, s, superprocess=True)
        factor = t ** 0.5 - s ** 0.5
        assert (full - sup) == pytest.approx(
            -factor * 2 * z ** 2 * ch.coupling_integral)
        # beta < 1 already has no coupling: flag is a no-op
        params_b = ModelParams(7, 2, 0.5, 1, v_rate=1.0)
        obs_b = GaussianBump((0,) * 7, 1.0)
        a = log_char_highdim(params_b, obs_b, z, t, s)
        bb = log_char_highdim(params_b, obs_b, z, t, s, superprocess=True)
        assert a == bb

    def test_beta_half_has_skew_phase(self):
        from occufluct.limits.highdim import log_char_highdim
        from occufluct.observables import GaussianBump
        params = ModelParams(7, 2, 0.5, 1, v_rate=1.0)
        obs = GaussianBump((0,) * 7, 1.0)
        val = log_char_highdim(params, obs, 1.0, 2.0, 1.0)
        assert val.imag != 0.0

    def test_high_c_uses_potential_weight(self):
        from occufluct.limits.highdim import log_char_highdim
        from occufluct.observables import GaussianBump
        params = ModelParams(8, 2, 1, 3, v_rate=1.0)   # High_C: gamma > alpha
        obs = GaussianBump((0,) * 8, 1.0)
        v1 = log_char_highdim(params, obs, 1.0, 1.0, 0.0)
        assert v1.real < 0
        # time-constant limit: increments between positive times vanish
        assert log_char_highdim(params, obs, 1.0, 2.0, 1.0) == 0.0
