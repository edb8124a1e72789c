"""Stationary targets, empirical moments, W2 distance, two-body example."""

import math

import numpy as np
import pytest

from softlangevin import (
    EmpiricalMoments,
    GaussianTarget,
    MechanismSpec,
    PathEnsemble,
    PotentialSpec,
    SystemConfig,
    empirical_moments,
    frozen_position_sensitivity,
    gaussian_w2,
    limit_target,
    prelimit_linear_parts,
    prelimit_stationary_gaussian,
    simulate_ensemble,
    two_body_config,
    two_body_report,
    w2_uncertainty,
)
from softlangevin.errors import (
    CapabilityError,
    ConfigurationError,
    InsufficientDataError,
    RegimeError,
)

from _oracles import lyapunov_kron, scalar_ou_var
import scipy.integrate


def _config(kind="spatial_confinement", eps=0.1, **kw):
    base = dict(
        d=2,
        k=1,
        gamma=1.0,
        beta=1.0,
        potential=PotentialSpec(alpha=1.0),
        mechanism=MechanismSpec(kind, eps),
        q0=np.array([1.0, 0.5]),
        p0=np.array([0.0, -0.3]),
        horizon_T=1.0,
        dt=0.01,
    )
    base.update(kw)
    return SystemConfig(**base)


def _target1d(var, mean=0.0):
    return GaussianTarget(("x",), np.array([mean]), np.array([[var]]), "test")


class TestGaussianW2:
    def test_identical_is_zero(self):
        t = GaussianTarget(
            ("a", "b"), np.array([1.0, -2.0]), np.diag([0.5, 2.0]), "t"
        )
        assert gaussian_w2(t, t) == pytest.approx(0.0, abs=1e-8)

    def test_point_masses(self):
        a = GaussianTarget(("x",), np.array([0.0]), 1e-18 * np.eye(1), "a")
        b = GaussianTarget(("x",), np.array([3.0]), 1e-18 * np.eye(1), "b")
        assert gaussian_w2(a, b) == pytest.approx(3.0, abs=1e-6)

    def test_scalar_variances(self):
        # 1-D closed form: W2^2 = (mu1-mu2)^2 + (s1-s2)^2
        assert gaussian_w2(_target1d(1.0), _target1d(4.0)) == pytest.approx(1.0)
        assert gaussian_w2(_target1d(1.0, 1.0), _target1d(1.0, -1.0)) == pytest.approx(2.0)

    def test_symmetry(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            B1 = rng.normal(size=(3, 3))
            B2 = rng.normal(size=(3, 3))
            t1 = GaussianTarget(
                ("a", "b", "c"), rng.normal(size=3), B1 @ B1.T + 0.1 * np.eye(3), "x"
            )
            t2 = GaussianTarget(
                ("a", "b", "c"), rng.normal(size=3), B2 @ B2.T + 0.1 * np.eye(3), "y"
            )
            assert gaussian_w2(t1, t2) == pytest.approx(gaussian_w2(t2, t1), abs=1e-9)

    def test_dimension_mismatch(self):
        with pytest.raises(ConfigurationError):
            gaussian_w2(
                _target1d(1.0),
                GaussianTarget(("a", "b"), np.zeros(2), np.eye(2), "t"),
            )

    def test_uncertainty_zero_for_exact_targets(self):
        assert w2_uncertainty(_target1d(1.0), _target1d(2.0)) == 0.0


class TestGaussianTargetValidation:
    def test_rejects_non_pd(self):
        with pytest.raises(ConfigurationError):
            GaussianTarget(("a", "b"), np.zeros(2), np.diag([1.0, 0.0]), "t")

    def test_rejects_asymmetric(self):
        with pytest.raises(ConfigurationError):
            GaussianTarget(
                ("a", "b"), np.zeros(2), np.array([[1.0, 0.5], [0.2, 1.0]]), "t"
            )

    def test_marginal(self):
        t = GaussianTarget(
            ("a", "b"), np.array([1.0, 2.0]), np.diag([0.5, 2.0]), "t"
        )
        m = t.marginal(["b"])
        assert m.mean[0] == 2.0 and m.cov[0, 0] == 2.0


class TestLimitTarget:
    def test_phase_space_conditions_position(self):
        # q2 | q1=0 under quadratic stiffness: var = 1/(beta K22)
        cfg = _config(
            "phase_space_confinement",
            potential=PotentialSpec(alpha=0.5, u_kind="pair_spring", u_amplitude=2.0),
            beta=2.0,
        )
        t = limit_target(cfg)
        assert t.labels == ("q2_0", "p2_0")
        k22 = 0.5 + 2.0  # alpha + pair stiffness
        assert t.cov[0, 0] == pytest.approx(1.0 / (2.0 * k22))
        assert t.cov[1, 1] == pytest.approx(0.5)  # momentum at 1/beta

    def test_spatial_keeps_heat_bath_momentum(self):
        t = limit_target(_config("spatial_confinement", beta=0.8))
        assert t.labels == ("q2_0", "p1_0", "p2_0")
        i = t.labels.index("p1_0")
        assert t.cov[i, i] == pytest.approx(1.0 / 0.8)

    def test_zero_mass_has_full_position_gibbs(self):
        cfg = _config(
            "zero_mass",
            potential=PotentialSpec(alpha=1.0, u_kind="pair_spring", u_amplitude=1.0),
        )
        t = limit_target(cfg)
        assert t.labels == ("q1_0", "q2_0", "p2_0")
        H = np.array([[2.0, -1.0], [-1.0, 2.0]])
        want = np.linalg.inv(H)
        assert np.allclose(t.cov[:2, :2], want, atol=1e-12)

    def test_frozen_position_enters_conditional_mean(self):
        cfg = _config(
            "infinite_mass",
            potential=PotentialSpec(alpha=1.0, u_kind="pair_spring", u_amplitude=1.0),
            q0=np.array([2.0, 0.0]),
        )
        t = limit_target(cfg)
        assert t.labels == ("q2_0", "p2_0")  # no stationary p1 marginal
        # conditional mean: -H22^-1 H21 w = (1/2) * 2
        assert t.mean[0] == pytest.approx(1.0)

    def test_fd_keeps_momentum_nofd_refused(self):
        t = limit_target(_config("infinite_friction_fd"))
        assert "p1_0" in t.labels
        with pytest.raises(CapabilityError):
            limit_target(_config("infinite_friction_nofd"))

    def test_non_pd_stiffness_refused(self):
        with pytest.raises(RegimeError):
            limit_target(_config("zero_mass", potential=PotentialSpec(alpha=0.0)))

    def test_quadrature_matches_gaussian_when_coupling_vanishes(self):
        # cross-coupling sine with the constrained block pinned at 0 reduces
        # exactly to the Gaussian marginal
        pot = PotentialSpec(alpha=1.0, u_kind="cross_sine", u_amplitude=0.6)
        t_quad = limit_target(_config("phase_space_confinement", potential=pot))
        t_gauss = limit_target(_config("phase_space_confinement"))
        assert np.allclose(t_quad.mean, t_gauss.mean, atol=1e-6)
        assert np.allclose(t_quad.cov, t_gauss.cov, atol=1e-6)

    def test_quadrature_against_scipy_quad(self):
        # 1-D tilted density exp(-beta(alpha x^2/2 + lam cos x))
        alpha, lam, beta = 1.0, 0.3, 1.0
        pot = PotentialSpec(alpha=alpha, u_kind="cosine", u_amplitude=lam)
        cfg = _config("spatial_confinement", potential=pot)
        t = limit_target(cfg)

        def dens(x):
            return math.exp(-beta * (0.5 * alpha * x * x + lam * math.cos(x)))

        z, _ = scipy.integrate.quad(dens, -12, 12)
        m1, _ = scipy.integrate.quad(lambda x: x * dens(x), -12, 12)
        m2, _ = scipy.integrate.quad(lambda x: x * x * dens(x), -12, 12)
        mean, var = m1 / z, m2 / z - (m1 / z) ** 2
        i = t.labels.index("q2_0")
        assert t.mean[i] == pytest.approx(mean, abs=1e-8)
        assert t.cov[i, i] == pytest.approx(var, abs=1e-8)

    def test_quadrature_dimension_gate(self):
        pot = PotentialSpec(alpha=1.0, u_kind="cosine", u_amplitude=0.4)
        cfg = _config(
            "spatial_confinement",
            potential=pot,
            d=5,
            k=1,
            q0=np.zeros(5),
            p0=np.zeros(5),
        )
        with pytest.raises(CapabilityError):
            limit_target(cfg)


class TestPrelimitStationary:
    def test_matches_kron_lyapunov_oracle(self):
        cfg = _config("phase_space_confinement", 0.2, beta=1.5, gamma=0.7)
        t = prelimit_stationary_gaussian(cfg)
        A, C = prelimit_linear_parts(cfg)
        want = lyapunov_kron(A, C @ C.T)
        assert np.allclose(t.cov, want, atol=1e-10)

    def test_fd_gibbs_form_epsilon_independent(self):
        # matched noise rescaling: stationary law is the Boltzmann Gaussian
        # diag(1/(beta alpha) I_q, 1/beta I_p) at every epsilon
        for eps in (0.5, 0.05):
            cfg = _config("infinite_friction_fd", eps, beta=2.0)
            t = prelimit_stationary_gaussian(cfg)
            assert np.allclose(t.cov, np.eye(4) / 2.0, atol=1e-9), eps

    def test_nofd_momentum_variance_shrinks_like_epsilon(self):
        for eps in (0.1, 0.01):
            cfg = _config("infinite_friction_nofd", eps)
            t = prelimit_stationary_gaussian(cfg)
            i = t.labels.index("p1_0")
            assert t.cov[i, i] == pytest.approx(eps, rel=1e-6)

    def test_non_hurwitz_refused(self):
        cfg = _config("infinite_friction_fd", potential=PotentialSpec(alpha=0.0))
        with pytest.raises(RegimeError):
            prelimit_stationary_gaussian(cfg)


class TestEmpiricalMoments:
    def _ensemble(self, states):
        return PathEnsemble(
            times=np.linspace(0, 1, states.shape[1]),
            states=states,
            component_labels=tuple(f"x_{i}" for i in range(states.shape[2])),
            master_seed=0,
            stepper="exponential_euler",
        )

    def test_constant_paths(self):
        states = np.tile(np.array([2.0, -1.0]), (3, 100, 1))
        emp = empirical_moments(self._ensemble(states), 0.5)
        assert np.allclose(emp.mean, [2.0, -1.0])
        assert np.allclose(emp.cov, 0.0, atol=1e-12)
        assert np.allclose(emp.mean_se, 0.0, atol=1e-12)

    def test_insufficient_points(self):
        states = np.zeros((3, 60, 1))
        with pytest.raises(InsufficientDataError):
            empirical_moments(self._ensemble(states), 0.5)  # 30 post burn-in

    def test_burn_in_validated(self):
        states = np.zeros((2, 100, 1))
        with pytest.raises(ConfigurationError):
            empirical_moments(self._ensemble(states), 0.95)

    def test_scalar_ou_variance_within_three_se(self):
        # free momentum of an unconfined system is an exact 1-D OU process
        cfg = _config(
            "spatial_confinement",
            0.5,
            potential=PotentialSpec(alpha=0.0),
            q0=np.zeros(2),
            p0=np.zeros(2),
            horizon_T=60.0,
            dt=0.05,
        )
        ens, _ = simulate_ensemble(cfg, 64, 21)
        emp = empirical_moments(ens, 0.5).subset(["p2_0"])
        assert scalar_ou_var(1.0, 1.0, 1e9) == 1.0
        assert abs(emp.mean[0]) <= 3 * max(emp.mean_se[0], 1e-3)
        assert abs(emp.cov[0, 0] - 1.0) <= 3 * emp.cov_se[0, 0]

    def test_subset_matches_decorated_labels(self):
        states = np.zeros((2, 80, 2))
        states[:, :, 1] = 5.0
        ens = PathEnsemble(
            times=np.linspace(0, 1, 80),
            states=states,
            component_labels=("q2~_0", "p2~_0"),
            master_seed=0,
            stepper="exponential_euler",
        )
        emp = empirical_moments(ens, 0.25).subset(["p2_0"])
        assert emp.mean[0] == 5.0

    def test_to_target_floors_tiny_eigenvalues(self):
        emp = EmpiricalMoments(
            labels=("a",),
            mean=np.zeros(1),
            cov=np.zeros((1, 1)),
            mean_se=np.zeros(1),
            cov_se=np.zeros((1, 1)),
            n_time_points=50,
            n_batches=20,
        )
        t = emp.to_target()
        assert t.cov[0, 0] > 0


class TestTwoBody:
    def test_stiffness_and_eigenvalues(self):
        rep = two_body_report(1.0, 1.0)
        assert np.allclose(rep.stiffness, [[2.0, -1.0], [-1.0, 1.0]])
        golden = math.sqrt(5.0)
        assert rep.eigenvalues[0] == pytest.approx((3 - golden) / 2)
        assert rep.eigenvalues[1] == pytest.approx((3 + golden) / 2)
        assert rep.is_positive_definite

    def test_determinant_product_rule(self):
        rng = np.random.default_rng(2)
        for _ in range(25):
            k, a = rng.uniform(0.1, 50.0, size=2)
            rep = two_body_report(float(k), float(a))
            assert rep.det == pytest.approx(k * a, rel=1e-9)
            assert rep.is_positive_definite

    def test_limit_frequency(self):
        assert two_body_report(1e6, 4.0, m=1.0).limit_frequency == pytest.approx(2.0)

    def test_config_mapping(self):
        cfg = two_body_config(50.0, 1.0, 1.0, 1.0, 1.0, 1.0)
        assert cfg.mechanism.kind == "spatial_confinement"
        assert cfg.epsilon == pytest.approx(0.02)
        assert cfg.potential.u_kind == "pair_spring"
        # softened stiffness reproduces the report's matrix
        A, _ = prelimit_linear_parts(cfg)
        K = -A[2:, :2]
        assert np.allclose(K, two_body_report(50.0, 1.0).stiffness)

    def test_non_unit_masses_refused(self):
        with pytest.raises(CapabilityError):
            two_body_config(1.0, 1.0, 2.0, 1.0, 1.0, 1.0)

    def test_positive_parameters_required(self):
        with pytest.raises(ConfigurationError):
            two_body_report(0.0, 1.0)
        with pytest.raises(ConfigurationError):
            two_body_config(1.0, -1.0, 1.0, 1.0, 1.0, 1.0)

    def test_long_run_matches_lyapunov_oracle(self):
        cfg = two_body_config(
            10.0, 1.0, 1.0, 1.0, 1.0, 1.0, horizon_T=150.0, dt=0.05
        )
        ens, _ = simulate_ensemble(cfg, 60, 13, record_stride=10)
        emp = empirical_moments(ens, 0.4)
        A, C = prelimit_linear_parts(cfg)
        want = lyapunov_kron(A, C @ C.T)
        for i in range(4):
            se = max(emp.cov_se[i, i], 1e-4)
            assert abs(emp.cov[i, i] - want[i, i]) <= 3.5 * se, i


class TestFrozenPositionSensitivity:
    def test_limits_do_not_commute_for_coupled_potential(self):
        cfg = _config(
            "infinite_mass",
            potential=PotentialSpec(alpha=1.0, u_kind="pair_spring", u_amplitude=1.0),
        )
        t1, t2, dist = frozen_position_sensitivity(cfg, 0.0, 2.0)
        # conditional means 0 and 1: the limiting law remembers where the
        # constrained coordinate was frozen
        assert t1.mean[0] == pytest.approx(0.0)
        assert t2.mean[0] == pytest.approx(1.0)
        assert dist >= 1.0 - 1e-9

    def test_gated_to_frozen_mechanisms(self):
        with pytest.raises(CapabilityError):
            frozen_position_sensitivity(_config("spatial_confinement"), 0.0, 1.0)
