"""Model layer: potentials, constraint mechanisms, system configuration.

The dynamics acted on are underdamped Langevin systems in R^d whose first k
coordinates ("constrained block", written q1/p1) are driven toward the
constraint {q1 = 0} by one of five softening mechanisms, while the remaining
d-k coordinates ("free block", q2/p2) feel ordinary friction gamma and
thermal noise at inverse temperature beta.

Every mechanism is summarised by four scalars (a, b, c, sigma1_scale) entering
the constrained block as

    dQ1 = a * P1 dt
    dP1 = (-grad_q1 V(Q) - b * Q1 - c * gamma * P1) dt
          + sigma1_scale * sqrt(2 * gamma / beta) dW1

with the free block unchanged:

    dQ2 = P2 dt
    dP2 = (-grad_q2 V(Q) - gamma * P2) dt + sqrt(2 * gamma / beta) dW2.

The potential is V(q) = (alpha/2)|q|^2 + U(q) with U drawn from a small
registry of analytically tractable nonlinearities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapabilityError, ConfigurationError

__all__ = [
    "MECHANISMS",
    "U_KINDS",
    "CoeffSet",
    "MechanismSpec",
    "PotentialSpec",
    "SystemConfig",
    "PathEnsemble",
    "ValidationReport",
    "mechanism_coefficients",
    "eval_potential_gradient",
    "eval_potential_value",
    "split_blocks",
    "potential_quadratic_hessian",
    "validate_potential",
]

#: Mechanism identifiers, in presentation order.
MECHANISMS = (
    "spatial_confinement",
    "phase_space_confinement",
    "zero_mass",
    "infinite_mass",
    "infinite_friction_fd",
    "infinite_friction_nofd",
)

#: Built-in nonlinearity kinds for U.
U_KINDS = ("zero", "cosine", "cross_sine", "pair_spring")


@dataclass(frozen=True)
class CoeffSet:
    """Unified coefficients (a, b, c, sigma1_scale) of the constrained block."""

    a: float
    b: float
    c: float
    sigma1_scale: float


@dataclass(frozen=True)
class MechanismSpec:
    """A constraint mechanism together with its softening parameter epsilon."""

    kind: str
    epsilon: float

    def __post_init__(self):
        if self.kind not in MECHANISMS:
            raise ConfigurationError(
                f"mechanism.kind must be one of {MECHANISMS}, got {self.kind!r}"
            )
        if not (isinstance(self.epsilon, (int, float)) and math.isfinite(self.epsilon)):
            raise ConfigurationError("mechanism.epsilon must be a finite number")
        if self.epsilon <= 0:
            raise ConfigurationError(
                f"mechanism.epsilon must be > 0, got {self.epsilon}"
            )


def mechanism_coefficients(mech: MechanismSpec) -> CoeffSet:
    """Return the (a, b, c, sigma1_scale) quadruple for a mechanism.

    The table:

    ==========================  =========  =====  =========  ============
    kind                        a          b      c          sigma1_scale
    ==========================  =========  =====  =========  ============
    spatial_confinement         1          1/eps  1          1
    phase_space_confinement     1 + 1/eps  1/eps  1 + 1/eps  1
    zero_mass                   1 + 1/eps  0      1 + 1/eps  1
    infinite_mass               eps        0      eps        1
    infinite_friction_fd        1          0      1/eps      1/sqrt(eps)
    infinite_friction_nofd      1          0      1/eps      1
    ==========================  =========  =====  =========  ============

    The two infinite-friction variants differ only in whether the noise is
    rescaled along with the friction (fluctuation-dissipation preserved) or
    left untouched (momentum freezes out).
    """
    eps = mech.epsilon
    kind = mech.kind
    if kind == "spatial_confinement":
        return CoeffSet(1.0, 1.0 / eps, 1.0, 1.0)
    if kind == "phase_space_confinement":
        s = 1.0 + 1.0 / eps
        return CoeffSet(s, 1.0 / eps, s, 1.0)
    if kind == "zero_mass":
        s = 1.0 + 1.0 / eps
        return CoeffSet(s, 0.0, s, 1.0)
    if kind == "infinite_mass":
        return CoeffSet(eps, 0.0, eps, 1.0)
    if kind == "infinite_friction_fd":
        return CoeffSet(1.0, 0.0, 1.0 / eps, 1.0 / math.sqrt(eps))
    if kind == "infinite_friction_nofd":
        return CoeffSet(1.0, 0.0, 1.0 / eps, 1.0)
    raise ConfigurationError(f"unknown mechanism kind {kind!r}")


@dataclass(frozen=True)
class PotentialSpec:
    """V(q) = (alpha/2)|q|^2 + U(q), with U from the built-in registry.

    u_kind:
      * ``zero``:        U = 0.
      * ``cosine``:      U = lam * sum_i cos(q_i). Gradient Lipschitz constant
                         |lam|; constrained-gradient sup bound |lam|*sqrt(k).
      * ``cross_sine``:  U = lam * sum_{i<=k, j>k} sin(q_i) sin(q_j), the
                         bounded coupling between the two blocks. Lipschitz
                         constant <= |lam|*k*(d-k); constrained-gradient bound
                         <= |lam|*(d-k)*sqrt(k).
      * ``pair_spring``: U = (lam/2) * sum_{i<=k} (q_i - q_{k+i})^2, a linear
                         spring pairing the i-th constrained coordinate with
                         the i-th free one (requires k <= d-k). Gradient
                         Lipschitz constant 2|lam|, but the constrained
                         gradient is *unbounded* — no sup bound is declared.
    """

    alpha: float
    u_kind: str = "zero"
    u_amplitude: float = 0.0

    def __post_init__(self):
        if not (isinstance(self.alpha, (int, float)) and math.isfinite(self.alpha)):
            raise ConfigurationError("potential.alpha must be a finite number")
        if self.alpha < 0:
            raise ConfigurationError(f"potential.alpha must be >= 0, got {self.alpha}")
        if self.u_kind not in U_KINDS:
            raise ConfigurationError(
                f"potential.u_kind must be one of {U_KINDS}, got {self.u_kind!r}"
            )
        if not math.isfinite(self.u_amplitude):
            raise ConfigurationError("potential.u_amplitude must be finite")

    # -- declared analytic constants -------------------------------------

    def lipschitz_grad_u(self, d: int, k: int) -> float:
        """Declared global Lipschitz constant of grad U."""
        lam = abs(self.u_amplitude)
        if self.u_kind == "zero":
            return 0.0
        if self.u_kind == "cosine":
            return lam
        if self.u_kind == "cross_sine":
            return lam * k * (d - k)
        if self.u_kind == "pair_spring":
            return 2.0 * lam
        raise ConfigurationError(self.u_kind)

    def sup_grad1_u(self, d: int, k: int):
        """Declared sup bound of |grad_q1 U|, or None if unbounded."""
        lam = abs(self.u_amplitude)
        if self.u_kind == "zero":
            return 0.0
        if self.u_kind == "cosine":
            return lam * math.sqrt(k)
        if self.u_kind == "cross_sine":
            return lam * (d - k) * math.sqrt(k)
        if self.u_kind == "pair_spring":
            return None
        raise ConfigurationError(self.u_kind)

    def is_quadratic(self) -> bool:
        """True when V is an (affine-)quadratic form, i.e. the flow is linear."""
        return self.u_kind == "zero" or self.u_kind == "pair_spring" or self.u_amplitude == 0.0


def _check_block_sizes(pot: PotentialSpec, d: int, k: int):
    if not (0 < k < d):
        raise ConfigurationError(f"need 0 < k < d, got k={k}, d={d}")
    if pot.u_kind == "pair_spring" and k > d - k:
        raise ConfigurationError(
            f"pair_spring pairs constrained coordinate i with free coordinate "
            f"k+i and needs k <= d-k, got k={k}, d={d}"
        )


def split_blocks(v: np.ndarray, k: int):
    """Split the last axis of a d-vector into (constrained, free) parts."""
    return v[..., :k], v[..., k:]


def eval_potential_value(pot: PotentialSpec, q: np.ndarray, k: int) -> np.ndarray:
    """V(q) evaluated along the last axis of q (shape (..., d))."""
    q = np.asarray(q, dtype=float)
    d = q.shape[-1]
    _check_block_sizes(pot, d, k)
    val = 0.5 * pot.alpha * np.sum(q * q, axis=-1)
    lam = pot.u_amplitude
    if pot.u_kind == "cosine" and lam != 0.0:
        val = val + lam * np.sum(np.cos(q), axis=-1)
    elif pot.u_kind == "cross_sine" and lam != 0.0:
        s1 = np.sum(np.sin(q[..., :k]), axis=-1)
        s2 = np.sum(np.sin(q[..., k:]), axis=-1)
        val = val + lam * s1 * s2
    elif pot.u_kind == "pair_spring" and lam != 0.0:
        diff = q[..., :k] - q[..., k : 2 * k]
        val = val + 0.5 * lam * np.sum(diff * diff, axis=-1)
    return val


def eval_potential_gradient(pot: PotentialSpec, q: np.ndarray, k: int) -> np.ndarray:
    """grad V(q), vectorised over leading axes of q (shape (..., d)).

    The result splits as (grad_q1 V, grad_q2 V) = split_blocks(out, k).
    """
    q = np.asarray(q, dtype=float)
    d = q.shape[-1]
    _check_block_sizes(pot, d, k)
    g = pot.alpha * q
    lam = pot.u_amplitude
    if pot.u_kind == "cosine" and lam != 0.0:
        g = g - lam * np.sin(q)
    elif pot.u_kind == "cross_sine" and lam != 0.0:
        s1 = np.sum(np.sin(q[..., :k]), axis=-1, keepdims=True)
        s2 = np.sum(np.sin(q[..., k:]), axis=-1, keepdims=True)
        g = g.copy()
        g[..., :k] += lam * np.cos(q[..., :k]) * s2
        g[..., k:] += lam * np.cos(q[..., k:]) * s1
    elif pot.u_kind == "pair_spring" and lam != 0.0:
        diff = q[..., :k] - q[..., k : 2 * k]
        g = g.copy()
        g[..., :k] += lam * diff
        g[..., k : 2 * k] -= lam * diff
    return g


def potential_quadratic_hessian(pot: PotentialSpec, d: int, k: int) -> np.ndarray:
    """Constant Hessian of V for quadratic potentials (zero / pair_spring).

    Raises CapabilityError for genuinely nonlinear U.
    """
    _check_block_sizes(pot, d, k)
    if not pot.is_quadratic():
        raise CapabilityError(
            f"potential with u_kind={pot.u_kind!r} and nonzero amplitude has a "
            "state-dependent Hessian"
        )
    h = pot.alpha * np.eye(d)
    lam = pot.u_amplitude
    if pot.u_kind == "pair_spring" and lam != 0.0:
        for i in range(k):
            j = k + i
            h[i, i] += lam
            h[j, j] += lam
            h[i, j] -= lam
            h[j, i] -= lam
    return h


@dataclass(frozen=True)
class ValidationReport:
    """Result of sampling-based validation of the declared gradient bounds."""

    declared_lipschitz: float
    observed_lipschitz: float
    declared_grad1_bound: float | None
    observed_grad1_max: float
    n_points: int
    passed: bool


def validate_potential(
    pot: PotentialSpec,
    d: int,
    k: int,
    radius: float = 8.0,
    grid_points: int = 400,
    seed: int = 0,
) -> ValidationReport:
    """Empirically check the declared Lipschitz/sup-bound constants of grad U.

    Samples point pairs in [-radius, radius]^d (deterministically, from the
    given seed) and compares the worst observed difference quotient of grad U
    and the largest |grad_q1 U| against the declared constants with 1e-9
    slack. For u_kinds without a declared sup bound (pair_spring) the bound
    check is skipped.
    """
    _check_block_sizes(pot, d, k)
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    pts = rng.uniform(-radius, radius, size=(grid_points, d))
    # difference quotients over random pairs plus short displacements
    partners = pts[rng.permutation(grid_points)]
    nearby = pts + rng.normal(scale=1e-3, size=pts.shape)

    pot_u_only = PotentialSpec(0.0, pot.u_kind, pot.u_amplitude)
    gu = eval_potential_gradient(pot_u_only, pts, k)
    observed_lip = 0.0
    for other in (partners, nearby):
        gv = eval_potential_gradient(pot_u_only, other, k)
        num = np.linalg.norm(gu - gv, axis=-1)
        den = np.linalg.norm(pts - other, axis=-1)
        ok = den > 1e-12
        if np.any(ok):
            observed_lip = max(observed_lip, float(np.max(num[ok] / den[ok])))

    observed_g1 = float(np.max(np.linalg.norm(gu[..., :k], axis=-1))) if k else 0.0

    declared_lip = pot.lipschitz_grad_u(d, k)
    declared_g1 = pot.sup_grad1_u(d, k)
    passed = observed_lip <= declared_lip + 1e-9
    if declared_g1 is not None:
        passed = passed and observed_g1 <= declared_g1 + 1e-9
    return ValidationReport(
        declared_lipschitz=declared_lip,
        observed_lipschitz=observed_lip,
        declared_grad1_bound=declared_g1,
        observed_grad1_max=observed_g1,
        n_points=grid_points,
        passed=passed,
    )


def _as_readonly_vector(x, d: int, name: str) -> np.ndarray:
    arr = np.array(x, dtype=float).reshape(-1)
    if arr.shape != (d,):
        raise ConfigurationError(f"{name} must have length d={d}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigurationError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SystemConfig:
    """Full description of one soft-constrained Langevin system.

    Immutable after construction; q0/p0 are stored as read-only arrays.
    """

    d: int
    k: int
    gamma: float
    beta: float
    potential: PotentialSpec
    mechanism: MechanismSpec
    q0: np.ndarray
    p0: np.ndarray
    horizon_T: float
    dt: float

    def __post_init__(self):
        if not (isinstance(self.d, int) and isinstance(self.k, int)):
            raise ConfigurationError("d and k must be integers")
        if not (0 < self.k < self.d):
            raise ConfigurationError(f"need 0 < k < d, got k={self.k}, d={self.d}")
        for name in ("gamma", "beta", "horizon_T", "dt"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigurationError(f"{name} must be a positive finite number, got {v!r}")
        if self.dt >= self.horizon_T:
            raise ConfigurationError(
                f"dt={self.dt} must be smaller than horizon_T={self.horizon_T}"
            )
        _check_block_sizes(self.potential, self.d, self.k)
        object.__setattr__(self, "q0", _as_readonly_vector(self.q0, self.d, "q0"))
        object.__setattr__(self, "p0", _as_readonly_vector(self.p0, self.d, "p0"))

    @property
    def epsilon(self) -> float:
        return self.mechanism.epsilon

    def coefficients(self) -> CoeffSet:
        return mechanism_coefficients(self.mechanism)

    def with_epsilon(self, epsilon: float) -> "SystemConfig":
        """Same system with the mechanism's epsilon replaced."""
        return SystemConfig(
            d=self.d,
            k=self.k,
            gamma=self.gamma,
            beta=self.beta,
            potential=self.potential,
            mechanism=MechanismSpec(self.mechanism.kind, epsilon),
            q0=self.q0,
            p0=self.p0,
            horizon_T=self.horizon_T,
            dt=self.dt,
        )

    def replace(self, **kw) -> "SystemConfig":
        """Copy with selected fields replaced."""
        cur = dict(
            d=self.d, k=self.k, gamma=self.gamma, beta=self.beta,
            potential=self.potential, mechanism=self.mechanism,
            q0=self.q0, p0=self.p0, horizon_T=self.horizon_T, dt=self.dt,
        )
        cur.update(kw)
        return SystemConfig(**cur)


@dataclass(frozen=True, eq=False)
class PathEnsemble:
    """A block of simulated trajectories on a shared time grid.

    states has shape (n_paths, n_times, dim); the layout of the last axis is
    described by component_labels. Bitwise reproducible for fixed
    (config, seed, stepper); construction fails hard on NaN/Inf.
    """

    times: np.ndarray
    states: np.ndarray
    component_labels: tuple[str, ...]
    master_seed: int
    stepper: str

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        states = np.asarray(self.states, dtype=float)
        if states.ndim != 3 or states.shape[1] != times.shape[0]:
            raise ConfigurationError(
                f"states must be (n_paths, n_times, dim) aligned with times, "
                f"got {states.shape} vs {times.shape}"
            )
        if states.shape[2] != len(self.component_labels):
            raise ConfigurationError("component_labels must match state dimension")
        from .errors import StabilityError

        if not np.all(np.isfinite(states)):
            bad = int(np.sum(~np.isfinite(states).all(axis=(1, 2))))
            raise StabilityError(
                f"non-finite states in {bad} of {states.shape[0]} paths",
                n_bad=bad,
                n_paths=states.shape[0],
            )
        times.setflags(write=False)
        states.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    @property
    def n_paths(self) -> int:
        return self.states.shape[0]

    def component(self, label: str) -> np.ndarray:
        """(n_paths, n_times) slice for one labelled component."""
        try:
            idx = self.component_labels.index(label)
        except ValueError:
            raise KeyError(f"no component {label!r}; have {self.component_labels}")
        return self.states[:, :, idx]
