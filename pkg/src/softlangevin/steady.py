"""Steady-state targets and long-run verification.

Builds the limiting stationary laws implied by each softening mechanism
(exactly for quadratic potentials, by dense quadrature for bounded
perturbations in up to two free dimensions), extracts empirical long-run
moments from simulated ensembles with batch-means error bars, and compares
laws through the Gaussian (Bures) Wasserstein-2 distance. Also provides the
two-spring/two-particle example system used throughout the demos.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .dynamics import prelimit_component_labels, prelimit_linear_parts
from .errors import (
    CapabilityError,
    ConfigurationError,
    InsufficientDataError,
    RegimeError,
)
from .model import (
    MechanismSpec,
    PathEnsemble,
    PotentialSpec,
    SystemConfig,
    eval_potential_value,
    mechanism_coefficients,
)

__all__ = [
    "GaussianTarget",
    "EmpiricalMoments",
    "TwoBodyReport",
    "limit_target",
    "prelimit_stationary_gaussian",
    "empirical_moments",
    "gaussian_w2",
    "w2_uncertainty",
    "two_body_config",
    "two_body_report",
    "frozen_position_sensitivity",
    "relaxation_rate",
    "default_steady_horizon",
    "canonical_label",
]

_QUAD_POINTS = 1201  # per-axis trapezoid resolution for bounded-U targets
_QUAD_MASS_TOL = 1e-8


def canonical_label(label: str) -> str:
    """Map decorated limit-state labels onto physical variable names.

    The limit systems decorate their coordinates (q2~_0, q1^_0, p1^_0) to
    signal that they are limit objects; for moment comparison they name the
    same physical variable as the undecorated pre-limit coordinate.
    """
    return label.replace("~", "").replace("^", "")


@dataclass(frozen=True)
class GaussianTarget:
    """A Gaussian law over named variables with a provenance note."""

    labels: tuple
    mean: np.ndarray
    cov: np.ndarray
    provenance: str

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        n = len(self.labels)
        if mean.shape != (n,) or cov.shape != (n, n):
            raise ConfigurationError(
                f"target shapes {mean.shape}/{cov.shape} do not match {n} labels"
            )
        if not np.allclose(cov, cov.T, atol=1e-10 * (1 + np.abs(cov).max())):
            raise ConfigurationError("target covariance must be symmetric")
        w = np.linalg.eigvalsh(0.5 * (cov + cov.T))
        if w.min() <= 0:
            raise ConfigurationError(
                f"target covariance must be positive definite (min eig {w.min():.3e})"
            )
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", 0.5 * (cov + cov.T))

    @property
    def dim(self) -> int:
        return len(self.labels)

    def marginal(self, labels) -> "GaussianTarget":
        idx = [self.labels.index(l) for l in labels]
        return GaussianTarget(
            labels=tuple(labels),
            mean=self.mean[idx],
            cov=self.cov[np.ix_(idx, idx)],
            provenance=self.provenance + " (marginal)",
        )


def _sym_sqrt(cov: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (cov + cov.T))
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def gaussian_w2(t1, t2) -> float:
    """Bures-Wasserstein distance between two Gaussian laws.

    W2^2 = |m1 - m2|^2 + tr(S1 + S2 - 2 (S2^{1/2} S1 S2^{1/2})^{1/2}).
    Accepts anything exposing .mean and .cov of matching dimension.
    """
    m1, c1 = np.asarray(t1.mean, dtype=float), np.asarray(t1.cov, dtype=float)
    m2, c2 = np.asarray(t2.mean, dtype=float), np.asarray(t2.cov, dtype=float)
    if m1.shape != m2.shape:
        raise ConfigurationError(f"dimension mismatch {m1.shape} vs {m2.shape}")
    root2 = _sym_sqrt(c2)
    cross = _sym_sqrt(root2 @ c1 @ root2)
    w2_sq = float(np.sum((m1 - m2) ** 2) + np.trace(c1 + c2 - 2.0 * cross))
    return math.sqrt(max(w2_sq, 0.0))


def w2_uncertainty(e1, e2) -> float:
    """First-order W2 uncertainty induced by moment standard errors.

    |dW2| <= |d mean| + |d cov|_F / (2 sigma_min), applied to both arguments;
    objects without standard errors (exact targets) contribute zero.
    """
    def parts(e):
        mse = np.asarray(getattr(e, "mean_se", np.zeros_like(e.mean)), dtype=float)
        cse = np.asarray(getattr(e, "cov_se", np.zeros_like(e.cov)), dtype=float)
        return float(np.linalg.norm(mse)), float(np.linalg.norm(cse))

    m1, c1 = parts(e1)
    m2, c2 = parts(e2)
    avg = 0.5 * (np.asarray(e1.cov, dtype=float) + np.asarray(e2.cov, dtype=float))
    lam_min = max(float(np.linalg.eigvalsh(avg).min()), 1e-12)
    return m1 + m2 + (c1 + c2) / (2.0 * math.sqrt(lam_min))


# --------------------------------------------------------------------------
# limiting stationary laws
# --------------------------------------------------------------------------


def _position_hessian(config: SystemConfig) -> np.ndarray:
    from .model import potential_quadratic_hessian

    return potential_quadratic_hessian(config.potential, config.d, config.k)


def _gaussian_position_marginal(config, pinned, w):
    """Mean/cov of the free-position Gibbs marginal for quadratic potentials.

    With full stiffness H, pinning q1 = w leaves the conditional Gaussian
    N(-H22^{-1} H21 w, beta^{-1} H22^{-1}); with nothing pinned the full
    position marginal is N(0, beta^{-1} H^{-1}).
    """
    H = _position_hessian(config)
    beta, k = config.beta, config.k
    if pinned:
        H22 = H[k:, k:]
        if np.linalg.eigvalsh(H22).min() <= 0:
            raise RegimeError(
                "free-position stiffness is not positive definite; the position "
                "marginal is not normalizable"
            )
        mean = -np.linalg.solve(H22, H[k:, :k] @ np.asarray(w, dtype=float))
        cov = np.linalg.inv(H22) / beta
    else:
        if np.linalg.eigvalsh(H).min() <= 0:
            raise RegimeError(
                "position stiffness is not positive definite; the position "
                "marginal is not normalizable"
            )
        mean = np.zeros(config.d)
        cov = np.linalg.inv(H) / beta
    return mean, 0.5 * (cov + cov.T)


def _quadrature_position_marginal(config, pinned, w):
    """Free-position moments of exp(-beta V) by dense trapezoid quadrature.

    Only available when the non-quadratic part of the potential is bounded
    and the number of integrated coordinates is at most 2; the integration
    box is sized so the discarded Gaussian-envelope mass is below 1e-8.
    """
    pot = config.potential
    beta, k, d = config.beta, config.k, config.d
    if pot.u_kind not in ("cosine", "cross_sine"):
        raise CapabilityError(
            f"no quadrature steady-state target for u_kind={pot.u_kind!r}"
        )
    if pot.alpha <= 0:
        raise CapabilityError(
            "a bounded perturbation needs alpha > 0 for a normalizable "
            "position marginal"
        )
    n_free = d - k if pinned else d
    if n_free > 2:
        raise CapabilityError(
            f"quadrature targets support at most 2 free position dimensions, "
            f"got {n_free}"
        )
    # |U| <= amp * d (cosine) or amp * k * (d - k) (cross terms)
    u_sup = abs(pot.u_amplitude) * (d if pot.u_kind == "cosine" else k * (d - k))
    radius = math.sqrt(
        2.0 * (math.log(max(n_free, 1) * 1e9) + 2.0 * beta * u_sup) / (beta * pot.alpha)
    )
    tail_bound = n_free * math.exp(
        -0.5 * beta * pot.alpha * radius**2 + 2.0 * beta * u_sup
    )
    if tail_bound >= _QUAD_MASS_TOL:
        raise RegimeError(
            f"could not certify discarded quadrature mass < {_QUAD_MASS_TOL:g} "
            f"(bound {tail_bound:.2e})"
        )
    axes = [np.linspace(-radius, radius, _QUAD_POINTS) for _ in range(n_free)]
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    full = np.empty((pts.shape[0], d))
    if pinned:
        full[:, :k] = np.asarray(w, dtype=float)
        full[:, k:] = pts
    else:
        full[:] = pts
    energy = eval_potential_value(pot, full, k)
    weights = np.exp(-beta * (energy - energy.min()))
    # trapezoid end-point halving, one factor per axis
    wax = np.ones(_QUAD_POINTS)
    wax[0] = wax[-1] = 0.5
    quad_w = wax if n_free == 1 else np.outer(wax, wax).ravel()
    weights = weights * quad_w
    total = weights.sum()
    mean = weights @ pts / total
    centered = pts - mean
    cov = (weights[:, None] * centered).T @ centered / total
    return mean, 0.5 * (cov + cov.T), tail_bound


def _momentum_block(beta: float, n: int):
    return np.zeros(n), np.eye(n) / beta


def limit_target(config: SystemConfig) -> GaussianTarget:
    """Stationary law of the limiting dynamics' surviving variables.

    Mechanism layouts (k constrained, d-k free coordinates):

    * spatial_confinement:   (q2, p1, p2), q1 pinned at 0; p1 keeps the
      unit-temperature heat-bath marginal even though its path oscillates.
    * phase_space_confinement: (q2, p2), q1 and p1 both pinned at 0.
    * zero_mass:             (q1, q2, p2), full position Gibbs marginal.
    * infinite_mass:         (q2, p2), q1 frozen at its initial value; the
      surviving momentum p1 has no stationary law and is excluded.
    * infinite_friction_fd:  (q2, p1, p2), q1 frozen at its initial value.

    For quadratic potentials the position marginal is exact Gaussian
    conditioning; for bounded perturbations (cosine / cross-coupling sine) the
    first two moments come from certified quadrature. The no-fluctuation-
    dissipation friction mechanism has no nondegenerate limiting law and
    raises CapabilityError.
    """
    kind = config.mechanism.kind
    d, k, beta = config.d, config.k, config.beta
    if kind == "infinite_friction_nofd":
        raise CapabilityError(
            "the friction mechanism without matching noise rescaling freezes "
            "the constrained momentum at 0; there is no nondegenerate "
            "stationary target to report"
        )

    pinned = kind != "zero_mass"
    if kind in ("spatial_confinement", "phase_space_confinement"):
        w = np.zeros(k)
    else:
        w = np.asarray(config.q0[:k], dtype=float)

    quad_note = ""
    if config.potential.is_quadratic():
        pos_mean, pos_cov = _gaussian_position_marginal(config, pinned, w)
        how = "exact Gaussian conditioning"
    else:
        pos_mean, pos_cov, tail = _quadrature_position_marginal(config, pinned, w)
        how = "certified quadrature"
        quad_note = f", discarded-mass bound {tail:.1e}"

    q_labels = (
        [f"q1_{i}" for i in range(k)] + [f"q2_{j}" for j in range(d - k)]
        if not pinned
        else [f"q2_{j}" for j in range(d - k)]
    )
    labels = list(q_labels)
    blocks_mean = [pos_mean]
    blocks_cov = [pos_cov]
    with_p1 = kind in ("spatial_confinement", "infinite_friction_fd")
    if with_p1:
        labels += [f"p1_{i}" for i in range(k)]
        m, c = _momentum_block(beta, k)
        blocks_mean.append(m)
        blocks_cov.append(c)
    labels += [f"p2_{j}" for j in range(d - k)]
    m, c = _momentum_block(beta, d - k)
    blocks_mean.append(m)
    blocks_cov.append(c)

    mean = np.concatenate(blocks_mean)
    cov = scipy.linalg.block_diag(*blocks_cov)
    pin_note = (
        "" if not pinned else f", constrained position pinned at {np.asarray(w).tolist()}"
    )
    return GaussianTarget(
        labels=tuple(labels),
        mean=mean,
        cov=cov,
        provenance=f"{kind} limiting steady state via {how}{pin_note}{quad_note}",
    )


def prelimit_stationary_gaussian(config: SystemConfig) -> GaussianTarget:
    """Stationary Gaussian of the pre-limit system at fixed epsilon.

    Solves the continuous Lyapunov equation A S + S A^T + C C^T = 0 for the
    linearized system; requires a quadratic potential and a Hurwitz drift.
    """
    A, C = prelimit_linear_parts(config)
    eigs = np.linalg.eigvals(A)
    if eigs.real.max() >= -1e-12:
        raise RegimeError(
            f"pre-limit drift is not Hurwitz (max Re eig {eigs.real.max():.3e}); "
            "no stationary law at this parameter point"
        )
    cov = scipy.linalg.solve_continuous_lyapunov(A, -C @ C.T)
    labels = prelimit_component_labels(config.d, config.k)
    return GaussianTarget(
        labels=tuple(labels),
        mean=np.zeros(2 * config.d),
        cov=0.5 * (cov + cov.T),
        provenance=(
            f"{config.mechanism.kind} pre-limit stationary law at "
            f"epsilon={config.epsilon:g} (Lyapunov solve)"
        ),
    )


# --------------------------------------------------------------------------
# empirical long-run moments
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class EmpiricalMoments:
    """Time-and-path averaged moments with 20-batch batch-means errors."""

    labels: tuple
    mean: np.ndarray
    cov: np.ndarray
    mean_se: np.ndarray
    cov_se: np.ndarray
    n_time_points: int
    n_batches: int

    def subset(self, labels) -> "EmpiricalMoments":
        """Marginal over the given labels, matching decorated names too."""
        canon = [canonical_label(l) for l in self.labels]
        idx = []
        for want in labels:
            want_c = canonical_label(want)
            if want_c not in canon:
                raise ConfigurationError(f"label {want!r} not present in {self.labels}")
            idx.append(canon.index(want_c))
        idx = np.asarray(idx)
        return EmpiricalMoments(
            labels=tuple(labels),
            mean=self.mean[idx],
            cov=self.cov[np.ix_(idx, idx)],
            mean_se=self.mean_se[idx],
            cov_se=self.cov_se[np.ix_(idx, idx)],
            n_time_points=self.n_time_points,
            n_batches=self.n_batches,
        )

    def to_target(self, provenance: str = "empirical moments") -> GaussianTarget:
        w, v = np.linalg.eigh(0.5 * (self.cov + self.cov.T))
        floor = 1e-12 * max(1.0, float(w.max()) if w.size else 1.0)
        cov = (v * np.clip(w, floor, None)) @ v.T
        return GaussianTarget(self.labels, self.mean.copy(), cov, provenance)


def empirical_moments(
    ensemble: PathEnsemble, burn_in_fraction: float = 0.5, n_batches: int = 20
) -> EmpiricalMoments:
    """First/second moments after burn-in with batch-means standard errors.

    Time points after the burn-in cut are split into contiguous batches; each
    batch is averaged over both paths and times, and the spread of the batch
    means gives the error bars (this absorbs autocorrelation along the path).
    """
    if not (0.0 <= burn_in_fraction <= 0.9):
        raise ConfigurationError(
            f"burn_in_fraction must be in [0, 0.9], got {burn_in_fraction}"
        )
    states = np.asarray(ensemble.states, dtype=float)
    n_paths, n_times, dim = states.shape
    start = int(math.floor(burn_in_fraction * n_times))
    post = states[:, start:, :]
    n_post = post.shape[1]
    if n_post < 40:
        raise InsufficientDataError(
            f"need >= 40 post-burn-in grid points, got {n_post}"
        )
    bounds = np.linspace(0, n_post, n_batches + 1).astype(int)
    first = np.empty((n_batches, dim))
    second = np.empty((n_batches, dim, dim))
    for b in range(n_batches):
        chunk = post[:, bounds[b] : bounds[b + 1], :].reshape(-1, dim)
        first[b] = chunk.mean(axis=0)
        second[b] = chunk.T @ chunk / chunk.shape[0]
    mean = first.mean(axis=0)
    m2 = second.mean(axis=0)
    cov = m2 - np.outer(mean, mean)
    mean_se = first.std(axis=0, ddof=1) / math.sqrt(n_batches)
    m2_se = second.std(axis=0, ddof=1) / math.sqrt(n_batches)
    cov_se = m2_se + np.abs(np.outer(mean_se, mean)) + np.abs(np.outer(mean, mean_se))
    return EmpiricalMoments(
        labels=tuple(ensemble.component_labels),
        mean=mean,
        cov=0.5 * (cov + cov.T),
        mean_se=mean_se,
        cov_se=0.5 * (cov_se + cov_se.T),
        n_time_points=int(n_post),
        n_batches=int(n_batches),
    )


# --------------------------------------------------------------------------
# relaxation-rate heuristics and the two-body example
# --------------------------------------------------------------------------


def relaxation_rate(config: SystemConfig) -> float:
    """Slowest linear decay rate of the pre-limit drift (spectral gap)."""
    A, _ = prelimit_linear_parts(config)
    rate = -float(np.linalg.eigvals(A).real.max())
    if rate <= 0:
        raise RegimeError("system has no spectral gap; no finite mixing horizon")
    return rate


def default_steady_horizon(config: SystemConfig) -> float:
    """Mixing-time heuristic: 50 / min(gamma, spectral gap)."""
    return 50.0 / min(config.gamma, relaxation_rate(config))


@dataclass(frozen=True)
class TwoBodyReport:
    """Stiffness summary of the two-particle, two-spring example."""

    stiffness: np.ndarray
    det: float
    eigenvalues: tuple
    is_positive_definite: bool
    limit_frequency: float


def two_body_report(k_spring: float, alpha_spring: float, m: float = 1.0) -> TwoBodyReport:
    """Stiffness matrix ((k+a, -a), (-a, a)) of the anchored pair of masses.

    Particle 1 is tied to the origin with stiffness k_spring and to particle 2
    with stiffness alpha_spring. det = k_spring * alpha_spring > 0 always, so
    the matrix is positive definite; as k_spring -> infinity the free particle
    oscillates at frequency sqrt(alpha_spring / m).
    """
    if k_spring <= 0 or alpha_spring <= 0 or m <= 0:
        raise ConfigurationError("two-body parameters must be positive")
    K = np.array(
        [[k_spring + alpha_spring, -alpha_spring], [-alpha_spring, alpha_spring]]
    )
    eigs = np.linalg.eigvalsh(K)
    return TwoBodyReport(
        stiffness=K,
        det=float(np.linalg.det(K)),
        eigenvalues=tuple(float(x) for x in eigs),
        is_positive_definite=bool(eigs.min() > 0),
        limit_frequency=math.sqrt(alpha_spring / m),
    )


def two_body_config(
    k_spring: float,
    alpha_spring: float,
    M: float,
    m: float,
    gamma: float,
    beta: float,
    mechanism: MechanismSpec | None = None,
    horizon_T: float = 20.0,
    dt: float = 0.01,
) -> SystemConfig:
    """System config for the anchored pair with the stiff spring softened.

    The anchor spring of stiffness k_spring is realized as the spatially
    confining mechanism at epsilon = 1/k_spring acting on particle 1 (pass a
    mechanism to override); the inter-particle spring is the quadratic pair
    coupling. Only the unit-mass normalization M = m = 1 maps onto the
    momentum equations used here.
    """
    for name, val in (
        ("k_spring", k_spring),
        ("alpha_spring", alpha_spring),
        ("M", M),
        ("m", m),
        ("gamma", gamma),
        ("beta", beta),
    ):
        if val <= 0:
            raise ConfigurationError(f"{name} must be positive, got {val}")
    if M != 1.0 or m != 1.0:
        raise CapabilityError(
            "the momentum-form equations assume unit masses; rescale time and "
            "temperature to reach M = m = 1 before building a config"
        )
    mech = mechanism or MechanismSpec("spatial_confinement", 1.0 / k_spring)
    return SystemConfig(
        d=2,
        k=1,
        gamma=gamma,
        beta=beta,
        potential=PotentialSpec(alpha=0.0, u_kind="pair_spring", u_amplitude=alpha_spring),
        mechanism=mech,
        q0=np.zeros(2),
        p0=np.zeros(2),
        horizon_T=horizon_T,
        dt=dt,
    )


def frozen_position_sensitivity(config: SystemConfig, w1, w2):
    """Limiting steady states for two different frozen constrained positions.

    For the frozen-position mechanisms the limiting law depends on where the
    constrained coordinate started — taking the long-time limit before or
    after the softening limit does not commute. Returns the two targets and
    their W2 distance (positive whenever the potential couples the blocks).
    """
    kind = config.mechanism.kind
    if kind not in ("infinite_mass", "infinite_friction_fd"):
        raise CapabilityError(
            "frozen-position sensitivity applies to the mechanisms that freeze "
            f"the constrained position at its initial value, not {kind}"
        )
    k = config.k

    def with_w(w):
        w = np.broadcast_to(np.asarray(w, dtype=float), (k,))
        q0 = np.array(config.q0, dtype=float)
        q0[:k] = w
        return config.replace(q0=q0)

    t1 = limit_target(with_w(w1))
    t2 = limit_target(with_w(w2))
    return t1, t2, gaussian_w2(t1, t2)
