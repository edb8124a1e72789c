"""Closed-form 2x2 exponentials, Gaussian propagation, decay bounds."""

import math

import numpy as np
import pytest

from softlangevin import (
    BlockParams,
    GaussianLaw,
    block_matrix_exp,
    block_params_from,
    exact_linear_gaussian,
    integrated_exp,
    matrix_exp_bound_check,
    mechanism_coefficients,
    MechanismSpec,
    ou_spatial_stats,
    psd_sqrt_factor,
    stochastic_convolution_cov,
)
from softlangevin.errors import RegimeError

from _oracles import lyapunov_kron, quad_convolution_cov, series_expm


def _random_params(rng):
    a = float(rng.uniform(0.05, 8.0))
    c = float(rng.uniform(0.05, 8.0))
    # cover all three eigenvalue regimes, including near-defective points
    mode = rng.integers(0, 4)
    if mode == 0:  # oscillatory
        b = float(rng.uniform(0.3, 30.0)) + c * c / (4 * a)
    elif mode == 1:  # overdamped
        b = float(rng.uniform(0.0, 1.0)) * c * c / (4 * a) * 0.9
    elif mode == 2:  # near-defective
        b = c * c / (4 * a) * (1.0 + float(rng.normal()) * 1e-9)
    else:
        b = float(rng.uniform(0.0, 40.0))
    return BlockParams(a=a, b_tot=b, c_tot=c)


class TestBlockMatrixExp:
    def test_identity_at_zero(self):
        params = BlockParams(1.0, 2.0, 3.0)
        assert np.allclose(block_matrix_exp(params, 0.0), np.eye(2), atol=1e-14)

    def test_against_series_oracle_random(self):
        rng = np.random.default_rng(42)
        worst = 0.0
        for _ in range(300):
            params = _random_params(rng)
            t = float(rng.uniform(0.0, 5.0))
            got = block_matrix_exp(params, t)
            want = series_expm(params.drift_matrix() * t)
            worst = max(worst, float(np.abs(got - want).max()))
        assert worst < 1e-10, worst

    def test_defective_point_exact(self):
        # a=1, c=2, b=1: repeated eigenvalue -1, exp = e^{-t} [[1+t, t], [-t, 1-t]]
        params = BlockParams(1.0, 1.0, 2.0)
        t = 0.9
        want = math.exp(-t) * np.array([[1 + t, t], [-t, 1 - t]])
        assert np.allclose(block_matrix_exp(params, t), want, atol=1e-12)

    def test_continuity_across_defective_band(self):
        t = 1.3
        at = block_matrix_exp(BlockParams(1.0, 0.25, 1.0), t)
        for side in (0.25 * (1 + 3e-7), 0.25 * (1 - 3e-7)):
            near = block_matrix_exp(BlockParams(1.0, side, 1.0), t)
            assert np.abs(near - at).max() < 1e-6

    def test_semigroup_property(self):
        rng = np.random.default_rng(3)
        for _ in range(40):
            params = _random_params(rng)
            t, s = rng.uniform(0.05, 1.5, size=2)
            whole = block_matrix_exp(params, float(t + s))
            split = block_matrix_exp(params, float(t)) @ block_matrix_exp(
                params, float(s)
            )
            assert np.abs(whole - split).max() < 1e-10

    def test_free_block_has_zero_decay(self):
        # b_tot = 0: upper-left entry stays exactly 1
        E = block_matrix_exp(BlockParams(1.0, 0.0, 1.7), 4.2)
        assert E[0, 0] == pytest.approx(1.0, abs=1e-12)
        assert E[1, 0] == pytest.approx(0.0, abs=1e-14)


class TestIntegratedAndConvolution:
    def test_integrated_exp_vs_quadrature(self):
        A = np.array([[0.0, 1.0], [-4.0, -1.2]])
        t = 1.7
        got = integrated_exp(A, t)
        grid = np.linspace(0.0, t, 4001)
        vals = np.stack([series_expm(A * s) for s in grid])
        want = np.trapezoid(vals, grid, axis=0)
        assert np.allclose(got, want, atol=1e-7)

    def test_convolution_cov_vs_quad_oracle(self):
        A = np.array([[0.0, 1.0], [-9.0, -0.8]])
        C = np.array([[0.0], [1.4]])
        for t in (0.3, 2.0):
            got = stochastic_convolution_cov(A, C, t)
            want = quad_convolution_cov(A, C, t)
            assert np.allclose(got, want, atol=1e-9), t

    def test_convolution_cov_converges_to_lyapunov(self):
        A = np.array([[0.0, 1.0], [-2.0, -1.5]])
        C = np.array([[0.0], [0.9]])
        got = stochastic_convolution_cov(A, C, 60.0)
        want = lyapunov_kron(A, C @ C.T)
        assert np.allclose(got, want, atol=1e-9)

    def test_exact_linear_gaussian_semigroup(self):
        A = np.array([[0.0, 1.0], [-5.0, -1.0]])
        C = np.array([[0.0], [1.0]])
        law0 = GaussianLaw(np.array([1.0, -0.5]), np.diag([0.2, 0.4]))
        one_hop = exact_linear_gaussian(A, C, law0, 1.1)
        mid = exact_linear_gaussian(A, C, law0, 0.4)
        two_hop = exact_linear_gaussian(A, C, mid, 0.7)
        assert np.allclose(one_hop.mean, two_hop.mean, atol=1e-10)
        assert np.allclose(one_hop.cov, two_hop.cov, atol=1e-10)

    def test_psd_sqrt_factor_reconstructs(self):
        rng = np.random.default_rng(8)
        B = rng.normal(size=(4, 4))
        cov = B @ B.T
        L = psd_sqrt_factor(cov)
        assert np.allclose(L @ L.T, cov, atol=1e-10)
        # rank-deficient covariance still factors
        cov2 = np.outer(np.ones(3), np.ones(3))
        L2 = psd_sqrt_factor(cov2)
        assert np.allclose(L2 @ L2.T, cov2, atol=1e-6)


class TestOuSpatialStats:
    def test_variance_against_quadrature(self):
        gamma, beta = 1.0, 1.0
        for eps in (0.1, 0.01):
            for t in (1.0, 5.0):
                co = mechanism_coefficients(MechanismSpec("spatial_confinement", eps))
                params = block_params_from(co, alpha=1.0, gamma=gamma)
                C = np.array([[0.0], [math.sqrt(2 * gamma / beta)]])
                want = quad_convolution_cov(params.drift_matrix(), C, t)[1, 1]
                _, var = ou_spatial_stats(gamma, beta, eps, 0.0, 0.0, t)
                assert var == pytest.approx(want, abs=2e-8), (eps, t)

    def test_mean_against_matrix_exponential(self):
        gamma, beta, eps, t = 1.0, 1.0, 0.05, 1.3
        q0, p0 = 0.7, -0.4
        co = mechanism_coefficients(MechanismSpec("spatial_confinement", eps))
        params = block_params_from(co, alpha=1.0, gamma=gamma)
        E = series_expm(params.drift_matrix() * t)
        want = E[1, 0] * q0 + E[1, 1] * p0
        mean, _ = ou_spatial_stats(gamma, beta, eps, q0, p0, t)
        assert mean == pytest.approx(want, abs=1e-10)

    def test_small_epsilon_approaches_heat_bath_saturation(self):
        # gap |Sigma_5(eps=0.001) - (1 - e^-5)| = 8.4249e-5, frozen from the
        # independent quadrature oracle
        _, var = ou_spatial_stats(1.0, 1.0, 0.001, 0.0, 0.0, 5.0)
        target = 1.0 - math.exp(-5.0)
        assert abs(var - target) < 1e-3
        assert abs(var - target) == pytest.approx(8.4249e-5, rel=1e-3)

    def test_overdamped_regime_rejected(self):
        # 4(1 + 1/eps) <= gamma^2 has no oscillatory closed form here
        with pytest.raises(RegimeError):
            ou_spatial_stats(10.0, 1.0, 10.0, 0.0, 0.0, 1.0)

    def test_variance_grows_from_zero(self):
        _, v_small = ou_spatial_stats(1.0, 1.0, 0.1, 0.0, 0.0, 1e-4)
        _, v_late = ou_spatial_stats(1.0, 1.0, 0.1, 0.0, 0.0, 3.0)
        assert 0.0 <= v_small < 1e-3 < v_late < 1.2


class TestBoundChecks:
    @pytest.mark.parametrize("gamma", [0.5, 1.0, 3.0])
    def test_free_block_uniform_bound(self, gamma):
        rep = matrix_exp_bound_check(0.0, gamma, np.linspace(0.0, 50.0, 700))
        assert rep.passed
        assert rep.bound_constant == pytest.approx(2.0 + gamma**-2)
        assert rep.observed_max <= rep.bound_constant + 1e-12

    @pytest.mark.parametrize("alpha,gamma", [(1.0, 1.0), (0.3, 1.5), (2.0, 0.7)])
    def test_damped_block_decay_rate(self, alpha, gamma):
        rep = matrix_exp_bound_check(alpha, gamma, np.linspace(0.0, 40.0, 1600))
        assert rep.passed
        assert rep.envelope_slope is not None
        assert rep.envelope_slope <= -0.95 * rep.eta
