"""Assembly of the pre-limit and limit SDE systems.

State layout conventions (full pre-limit system, dimension 2d):

    x = [q1 (k), q2 (d-k), p1 (k), p2 (d-k)]

Limit systems keep only the surviving components; their layouts are

    spatial/phase-space/inf-friction : [q2~, p2~]
    zero_mass                        : [q1^ (overdamped), q2~, p2~]
    infinite_mass                    : [p1^, q2~, p2~]

where ~ marks the free block of the limit and ^ the surviving constrained
component. Driver slots are shared with the pre-limit system so that coupled
simulations can reuse identical Brownian increments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapabilityError, ConfigurationError, DegenerateConstraintError
from .model import (
    MechanismSpec,
    SystemConfig,
    eval_potential_gradient,
    mechanism_coefficients,
    potential_quadratic_hessian,
)

__all__ = [
    "AffineReduction",
    "LimitSystem",
    "SdeSystem",
    "affine_reduce",
    "build_limit",
    "build_prelimit",
    "prelimit_linear_parts",
]

#: How the limit law of the constrained momentum is reported when it is not
#: simulated pathwise.
P1_PATHWISE = "pathwise"            # p1 survives as a simulated component
P1_GAUSSIAN_STATIONARY = "gaussian_stationary"  # distributional limit N(0, 1/beta)
P1_FROZEN_ZERO = "frozen_zero"      # converges to 0
P1_NONE = "none"                    # no statement (not part of the limit)


@dataclass(frozen=True, eq=False)
class SdeSystem:
    """dX = drift(X, t) dt + noise_matrix dW with labelled driver columns."""

    dim: int
    drift: object  # callable (x[..., dim], t) -> [..., dim]
    noise_matrix: np.ndarray
    driver_slots: tuple[str, ...]
    component_labels: tuple[str, ...]

    def __post_init__(self):
        nm = np.asarray(self.noise_matrix, dtype=float)
        if nm.shape != (self.dim, len(self.driver_slots)):
            raise ConfigurationError(
                f"noise_matrix must be dim x n_drivers = {self.dim} x "
                f"{len(self.driver_slots)}, got {nm.shape}"
            )
        if len(self.component_labels) != self.dim:
            raise ConfigurationError("component_labels must match dim")
        nm.setflags(write=False)
        object.__setattr__(self, "noise_matrix", nm)

    def index_of(self, label: str) -> int:
        return self.component_labels.index(label)


@dataclass(frozen=True, eq=False)
class LimitSystem:
    """The epsilon -> 0 dynamics: surviving components + frozen statements."""

    mechanism_kind: str
    sde: SdeSystem
    surviving_vars: tuple[str, ...]
    frozen_values: dict
    p1_mode: str
    #: initial state of the limit sde, inherited from the pre-limit config
    x0: np.ndarray

    def __post_init__(self):
        x0 = np.asarray(self.x0, dtype=float)
        if x0.shape != (self.sde.dim,):
            raise ConfigurationError("x0 must match the limit sde dimension")
        x0.setflags(write=False)
        object.__setattr__(self, "x0", x0)


def _labels(prefix: str, n: int, offset: int = 0):
    return tuple(f"{prefix}{i + offset}" for i in range(n))


def prelimit_component_labels(d: int, k: int) -> tuple[str, ...]:
    return (
        _labels("q1_", k)
        + _labels("q2_", d - k)
        + _labels("p1_", k)
        + _labels("p2_", d - k)
    )


def driver_slot_labels(d: int, k: int) -> tuple[str, ...]:
    return _labels("W1_", k) + _labels("W2_", d - k)


def build_prelimit(config: SystemConfig) -> SdeSystem:
    """The full 2d-dimensional softened system for the configured mechanism."""
    d, k = config.d, config.k
    co = mechanism_coefficients(config.mechanism)
    gamma, beta = config.gamma, config.beta
    sbar = math.sqrt(2.0 * gamma / beta)
    pot = config.potential

    a, b, c = co.a, co.b, co.c

    def drift(x, t=0.0):
        x = np.asarray(x, dtype=float)
        q = x[..., :d]
        p1 = x[..., d : d + k]
        p2 = x[..., d + k :]
        g = eval_potential_gradient(pot, q, k)
        out = np.empty_like(x)
        out[..., :k] = a * p1
        out[..., k:d] = p2
        out[..., d : d + k] = -g[..., :k] - b * q[..., :k] - c * gamma * p1
        out[..., d + k :] = -g[..., k:] - gamma * p2
        return out

    nm = np.zeros((2 * d, d))
    for i in range(k):
        nm[d + i, i] = co.sigma1_scale * sbar
    for j in range(d - k):
        nm[d + k + j, k + j] = sbar
    return SdeSystem(
        dim=2 * d,
        drift=drift,
        noise_matrix=nm,
        driver_slots=driver_slot_labels(d, k),
        component_labels=prelimit_component_labels(d, k),
    )


def build_limit(config: SystemConfig) -> LimitSystem:
    """The limiting dynamics as epsilon -> 0 for the configured mechanism.

    All mechanisms share the free-block limit

        dq~ = p~ dt,
        dp~ = -grad_q2 V(q1*, q~) dt - gamma p~ dt + sqrt(2 gamma / beta) dW2,

    where q1* is 0 (confinements), the overdamped component q1^ (zero_mass)
    or the initial value Q1_0 (infinite mass / friction). They differ in which
    constrained components survive:

    * spatial/phase-space: none pathwise (spatial keeps the p1 heat bath
      distributionally; phase-space freezes p1 at 0 in law... p1 simply does
      not appear in the limit state).
    * zero_mass: q1^ follows the overdamped equation
        dq1^ = -(1/gamma) grad_q1 V(q1^, q~) dt + sqrt(2/(beta gamma)) dW1.
    * infinite_mass: q1 freezes at Q1_0; p1^ keeps integrating the force,
        dp1^ = -grad_q1 V(Q1_0, q~) dt + sqrt(2 gamma / beta) dW1.
    * infinite_friction_fd: q1 freezes at Q1_0; p1 has the distributional
      limit N(0, 1/beta) only (no pathwise equation).
    * infinite_friction_nofd: q1 freezes at Q1_0; p1 -> 0.
    """
    d, k = config.d, config.k
    gamma, beta = config.gamma, config.beta
    pot = config.potential
    kind = config.mechanism.kind
    sbar = math.sqrt(2.0 * gamma / beta)
    nfree = d - k
    q1_0 = np.array(config.q0[:k], dtype=float)
    p1_0 = np.array(config.p0[:k], dtype=float)

    q2_labels = _labels("q2~_", nfree)
    p2_labels = _labels("p2~_", nfree)
    w2_slots = _labels("W2_", nfree)
    w1_slots = _labels("W1_", k)

    def grad_with_q1(q1val, q2):
        """grad V at (q1val, q2) with q1val broadcast over leading axes."""
        full = np.empty(q2.shape[:-1] + (d,))
        full[..., :k] = q1val
        full[..., k:] = q2
        return eval_potential_gradient(pot, full, k)

    if kind in ("spatial_confinement", "phase_space_confinement"):
        def drift(x, t=0.0):
            x = np.asarray(x, dtype=float)
            q2 = x[..., :nfree]
            p2 = x[..., nfree:]
            g = grad_with_q1(0.0, q2)
            out = np.empty_like(x)
            out[..., :nfree] = p2
            out[..., nfree:] = -g[..., k:] - gamma * p2
            return out

        nm = np.zeros((2 * nfree, nfree))
        for j in range(nfree):
            nm[nfree + j, j] = sbar
        sde = SdeSystem(
            dim=2 * nfree,
            drift=drift,
            noise_matrix=nm,
            driver_slots=w2_slots,
            component_labels=q2_labels + p2_labels,
        )
        p1_mode = P1_GAUSSIAN_STATIONARY if kind == "spatial_confinement" else P1_NONE
        return LimitSystem(
            mechanism_kind=kind,
            sde=sde,
            surviving_vars=sde.component_labels,
            frozen_values={"q1": np.zeros(k)},
            p1_mode=p1_mode,
            x0=np.concatenate([config.q0[k:], config.p0[k:]]),
        )

    if kind == "zero_mass":
        qh_labels = _labels("q1^_", k)

        def drift(x, t=0.0):
            x = np.asarray(x, dtype=float)
            qh = x[..., :k]
            q2 = x[..., k : k + nfree]
            p2 = x[..., k + nfree :]
            g = grad_with_q1(qh, q2)
            out = np.empty_like(x)
            out[..., :k] = -g[..., :k] / gamma
            out[..., k : k + nfree] = p2
            out[..., k + nfree :] = -g[..., k:] - gamma * p2
            return out

        nm = np.zeros((k + 2 * nfree, d))
        for i in range(k):
            nm[i, i] = math.sqrt(2.0 / (beta * gamma))
        for j in range(nfree):
            nm[k + nfree + j, k + j] = sbar
        sde = SdeSystem(
            dim=k + 2 * nfree,
            drift=drift,
            noise_matrix=nm,
            driver_slots=w1_slots + w2_slots,
            component_labels=qh_labels + q2_labels + p2_labels,
        )
        return LimitSystem(
            mechanism_kind=kind,
            sde=sde,
            surviving_vars=sde.component_labels,
            frozen_values={},
            p1_mode=P1_NONE,
            x0=np.concatenate([q1_0, config.q0[k:], config.p0[k:]]),
        )

    if kind == "infinite_mass":
        ph_labels = _labels("p1^_", k)

        def drift(x, t=0.0):
            x = np.asarray(x, dtype=float)
            q2 = x[..., k : k + nfree]
            p2 = x[..., k + nfree :]
            g = grad_with_q1(q1_0, q2)
            out = np.empty_like(x)
            out[..., :k] = -g[..., :k]
            out[..., k : k + nfree] = p2
            out[..., k + nfree :] = -g[..., k:] - gamma * p2
            return out

        nm = np.zeros((k + 2 * nfree, d))
        for i in range(k):
            nm[i, i] = sbar
        for j in range(nfree):
            nm[k + nfree + j, k + j] = sbar
        sde = SdeSystem(
            dim=k + 2 * nfree,
            drift=drift,
            noise_matrix=nm,
            driver_slots=w1_slots + w2_slots,
            component_labels=ph_labels + q2_labels + p2_labels,
        )
        return LimitSystem(
            mechanism_kind=kind,
            sde=sde,
            surviving_vars=sde.component_labels,
            frozen_values={"q1": q1_0},
            p1_mode=P1_PATHWISE,
            x0=np.concatenate([p1_0, config.q0[k:], config.p0[k:]]),
        )

    if kind in ("infinite_friction_fd", "infinite_friction_nofd"):
        def drift(x, t=0.0):
            x = np.asarray(x, dtype=float)
            q2 = x[..., :nfree]
            p2 = x[..., nfree:]
            g = grad_with_q1(q1_0, q2)
            out = np.empty_like(x)
            out[..., :nfree] = p2
            out[..., nfree:] = -g[..., k:] - gamma * p2
            return out

        nm = np.zeros((2 * nfree, nfree))
        for j in range(nfree):
            nm[nfree + j, j] = sbar
        sde = SdeSystem(
            dim=2 * nfree,
            drift=drift,
            noise_matrix=nm,
            driver_slots=w2_slots,
            component_labels=q2_labels + p2_labels,
        )
        p1_mode = (
            P1_GAUSSIAN_STATIONARY if kind == "infinite_friction_fd" else P1_FROZEN_ZERO
        )
        return LimitSystem(
            mechanism_kind=kind,
            sde=sde,
            surviving_vars=sde.component_labels,
            frozen_values={"q1": q1_0},
            p1_mode=p1_mode,
            x0=np.concatenate([config.q0[k:], config.p0[k:]]),
        )

    raise ConfigurationError(f"unknown mechanism kind {kind!r}")


def prelimit_linear_parts(config: SystemConfig):
    """(A, C) of the pre-limit system when the potential is quadratic.

    Used for exact Gaussian laws, stationary covariances and the exact
    stepping of linear systems. Raises CapabilityError for nonlinear U.
    """
    d, k = config.d, config.k
    hess = potential_quadratic_hessian(config.potential, d, k)
    co = mechanism_coefficients(config.mechanism)
    gamma, beta = config.gamma, config.beta
    A = np.zeros((2 * d, 2 * d))
    # velocity rows
    for i in range(k):
        A[i, d + i] = co.a
    for j in range(k, d):
        A[j, d + j] = 1.0
    # force rows
    A[d:, :d] = -hess
    for i in range(k):
        A[d + i, i] += -co.b
        A[d + i, d + i] = -co.c * gamma
    for j in range(k, d):
        A[d + j, d + j] = -gamma
    sbar = math.sqrt(2.0 * gamma / beta)
    C = np.zeros((2 * d, d))
    for i in range(k):
        C[d + i, i] = co.sigma1_scale * sbar
    for j in range(k, d):
        C[d + j, j] = sbar
    return A, C


@dataclass(frozen=True, eq=False)
class AffineReduction:
    """Orthonormal change of variables diagonalising an affine constraint.

    For xi(Q) = Y Q + e with Y Y^T positive definite, O is orthonormal with
    O (Y Y^T) O^T = diag(weights), weights nonincreasing. The transformed
    constraint components are xi~ = O (Y Q + e); each one is penalised
    independently with weight weights[i].
    """

    O: np.ndarray
    weights: np.ndarray
    Y: np.ndarray
    e: np.ndarray

    def transformed_constraint(self, q: np.ndarray) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        return (self.Y @ q[..., None])[..., 0] @ self.O.T + self.e @ self.O.T

    def describe(self) -> dict:
        return {
            "new_variables": "xi~ = O (Y q + e)",
            "weights": [float(w) for w in self.weights],
        }


def affine_reduce(Y: np.ndarray, e: np.ndarray) -> AffineReduction:
    """Diagonalise the penalty of an affine constraint xi(Q) = Y Q + e.

    Returns the orthonormal O and the nonincreasing diagonal weights of
    O (Y Y^T) O^T. Rank-deficient Y Y^T raises DegenerateConstraintError.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    e = np.atleast_1d(np.asarray(e, dtype=float))
    kc, d = Y.shape
    if e.shape != (kc,):
        raise ConfigurationError(f"e must have length {kc}, got {e.shape}")
    gram = Y @ Y.T
    w, v = np.linalg.eigh(gram)
    if w[-1] <= 0 or w[0] <= 1e-12 * w[-1]:
        raise DegenerateConstraintError(
            f"Y Y^T is numerically rank deficient (eigenvalues {w})"
        )
    order = np.argsort(w)[::-1]
    weights = w[order]
    O = v[:, order].T
    # fix sign convention: first nonzero entry of each row positive
    for i in range(O.shape[0]):
        row = O[i]
        nz = np.flatnonzero(np.abs(row) > 1e-12)
        if nz.size and row[nz[0]] < 0:
            O[i] = -row
    O.setflags(write=False)
    weights.setflags(write=False)
    return AffineReduction(O=O, weights=weights, Y=Y, e=e)
