"""Closed-form linear algebra for the constrained 2x2 block and Gaussian laws.

The constrained coordinate pair (q, p) under a mechanism with coefficients
(a, b_mech, c_mech) and quadratic stiffness alpha evolves linearly with drift
matrix

    A = [[0,      a     ],
         [-b_tot, -c_tot]],   b_tot = alpha + b_mech,  c_tot = c_mech * gamma.

exp(A t) has three regimes controlled by theta = sqrt(c_tot^2 - 4 a b_tot):
two real eigenvalues, a complex (oscillatory) pair, or a defective double
eigenvalue. All three are implemented in real arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import ConfigurationError, RegimeError

__all__ = [
    "BlockParams",
    "GaussianLaw",
    "block_matrix_exp",
    "block_params_from",
    "exact_linear_gaussian",
    "integrated_exp",
    "matrix_exp_bound_check",
    "ou_spatial_stats",
    "psd_sqrt_factor",
]

#: Relative width of the defective band: |theta| < THETA_BAND * c_tot is
#: treated as the double-eigenvalue case.
THETA_BAND = 1e-6


@dataclass(frozen=True)
class BlockParams:
    """Scalars describing one constrained 2x2 block."""

    a: float
    b_tot: float
    c_tot: float

    def __post_init__(self):
        for name in ("a", "b_tot", "c_tot"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ConfigurationError(f"{name} must be finite, got {v!r}")

    @property
    def theta_sq(self) -> float:
        return self.c_tot * self.c_tot - 4.0 * self.a * self.b_tot

    def drift_matrix(self) -> np.ndarray:
        return np.array([[0.0, self.a], [-self.b_tot, -self.c_tot]])


def block_params_from(coeffs, alpha: float, gamma: float) -> BlockParams:
    """BlockParams of the constrained pair for a mechanism CoeffSet."""
    return BlockParams(a=coeffs.a, b_tot=alpha + coeffs.b, c_tot=coeffs.c * gamma)


def block_matrix_exp(params: BlockParams, t: float) -> np.ndarray:
    """exp(A t) for A = [[0, a], [-b_tot, -c_tot]] in closed form.

    Dispatches on theta^2 = c_tot^2 - 4 a b_tot:

    * theta^2 > 0 (and outside the defective band): two real eigenvalues
      l1 = -(c+theta)/2 and l2 = -2ab/(c+theta) (the latter written to avoid
      cancellation when a*b is small);
    * theta^2 < 0: damped rotation at frequency |theta|/2;
    * |theta| within THETA_BAND * c_tot of zero: the defective double
      eigenvalue -c/2 with its polynomial correction.
    """
    a, b, c = params.a, params.b_tot, params.c_tot
    th2 = params.theta_sq
    band = THETA_BAND * abs(c)

    if th2 > 0 and math.sqrt(th2) >= band:
        th = math.sqrt(th2)
        l1 = -0.5 * (c + th)
        # l1*l2 = a*b exactly; this form avoids catastrophic cancellation
        # in -(c - th)/2 when 4ab << c^2.
        l2 = -2.0 * a * b / (c + th) if (c + th) != 0.0 else -0.5 * (c - th)
        e1 = math.exp(l1 * t)
        e2 = math.exp(l2 * t)
        inv = 1.0 / th
        return np.array(
            [
                [(l2 * e1 - l1 * e2) * inv, a * (e2 - e1) * inv],
                [-b * (e2 - e1) * inv, (l2 * e2 - l1 * e1) * inv],
            ]
        )
    if th2 < 0 and math.sqrt(-th2) >= band:
        om = 0.5 * math.sqrt(-th2)
        decay = math.exp(-0.5 * c * t)
        cs = math.cos(om * t)
        sn = math.sin(om * t)
        half_c = 0.5 * c / om
        return decay * np.array(
            [
                [cs + half_c * sn, (a / om) * sn],
                [-(b / om) * sn, cs - half_c * sn],
            ]
        )
    decay = math.exp(-0.5 * c * t)
    return decay * np.array(
        [
            [1.0 + 0.5 * c * t, a * t],
            [-b * t, 1.0 - 0.5 * c * t],
        ]
    )


def integrated_exp(A: np.ndarray, t: float) -> np.ndarray:
    """J(t) = integral_0^t exp(A s) ds via the augmented block exponential.

    expm([[A, I], [0, 0]] * t) has J(t) in its upper-right block; this is
    exact to machine precision and needs no invertibility of A.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    aug = np.zeros((2 * n, 2 * n))
    aug[:n, :n] = A
    aug[:n, n:] = np.eye(n)
    return expm(aug * t)[:n, n:]


@dataclass(frozen=True, eq=False)
class GaussianLaw:
    """Mean vector and covariance matrix of a Gaussian state distribution."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape != (mean.shape[0], mean.shape[0]):
            raise ConfigurationError(
                f"cov shape {cov.shape} incompatible with mean shape {mean.shape}"
            )
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise ConfigurationError("GaussianLaw requires finite mean/cov")
        asym = np.max(np.abs(cov - cov.T)) if cov.size else 0.0
        scale = max(1.0, float(np.max(np.abs(cov)))) if cov.size else 1.0
        if asym > 1e-9 * scale:
            raise ConfigurationError("covariance must be symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", 0.5 * (cov + cov.T))


def _gauss_legendre_panels(f, t0: float, t1: float, n_panels: int, nodes=None):
    """Sum of 20-point Gauss-Legendre quadratures of matrix-valued f."""
    if nodes is None:
        nodes = np.polynomial.legendre.leggauss(20)
    x, w = nodes
    total = None
    edges = np.linspace(t0, t1, n_panels + 1)
    for left, right in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (left + right)
        half = 0.5 * (right - left)
        for xi, wi in zip(x, w):
            val = f(mid + half * xi) * (wi * half)
            total = val if total is None else total + val
    return total


def stochastic_convolution_cov(
    A: np.ndarray, C: np.ndarray, t: float, tol: float = 1e-10, max_doublings: int = 14
) -> np.ndarray:
    """G(t) = integral_0^t exp(As) C C^T exp(A^T s) ds by adaptive quadrature.

    Fixed-order Gauss-Legendre panels, doubled until two successive
    refinements agree to `tol` in max norm.
    """
    A = np.asarray(A, dtype=float)
    C = np.asarray(C, dtype=float)
    if C.ndim == 1:
        C = C[:, None]
    Q = C @ C.T

    def integrand(s):
        E = expm(A * s)
        return E @ Q @ E.T

    nodes = np.polynomial.legendre.leggauss(20)
    # start with enough panels to resolve the fastest decay scale
    rate = float(np.max(np.abs(np.linalg.eigvals(A)))) if A.size else 0.0
    n_panels = max(1, min(64, int(math.ceil(abs(t) * rate / 8.0))))
    prev = _gauss_legendre_panels(integrand, 0.0, t, n_panels, nodes)
    for _ in range(max_doublings):
        n_panels *= 2
        cur = _gauss_legendre_panels(integrand, 0.0, t, n_panels, nodes)
        if np.max(np.abs(cur - prev)) < tol:
            prev = cur
            break
        prev = cur
    return 0.5 * (prev + prev.T)


def exact_linear_gaussian(
    A: np.ndarray, C: np.ndarray, law0: GaussianLaw, t: float
) -> GaussianLaw:
    """Marginal law at time t of dX = A X dt + C dW from Gaussian initial law.

    mean_t = exp(At) mean_0;
    cov_t  = exp(At) cov_0 exp(At)^T + integral_0^t exp(As) CC^T exp(A^T s) ds.
    """
    A = np.asarray(A, dtype=float)
    if t < 0:
        raise ConfigurationError(f"t must be >= 0, got {t}")
    E = expm(A * t)
    mean = E @ law0.mean
    cov = E @ law0.cov @ E.T + stochastic_convolution_cov(A, C, t)
    return GaussianLaw(mean=mean, cov=cov)


def psd_sqrt_factor(cov: np.ndarray, floor: float = 1e-14) -> np.ndarray:
    """Deterministic factor L with L L^T = cov for PSD cov.

    Symmetric eigendecomposition; eigenvalues below floor * max(eigenvalue, 1)
    are treated as exact zeros. Zeroing (rather than flooring) matters for
    coupled systems, where perfectly correlated noise directions must receive
    *no* independent randomness, keeping identical sub-blocks identical.
    """
    cov = np.asarray(cov, dtype=float)
    w, v = np.linalg.eigh(0.5 * (cov + cov.T))
    lo = floor * max(1.0, float(w[-1]) if w.size else 1.0)
    w = np.where(w < lo, 0.0, w)
    return v * np.sqrt(w)


def ou_spatial_stats(
    gamma: float, beta: float, epsilon: float, q0: float, p0: float, t: float
):
    """Exact mean/variance of the constrained momentum for the scalar
    spatially-confined model with V(q) = q^2 / 2.

    With b_tot = 1 + 1/epsilon and Omega = sqrt(4 b_tot - gamma^2) (real in
    the oscillatory regime this formula covers):

      mean_t = e^{-gamma t/2} [ -(2 b_tot / Omega) sin(Omega t / 2) q0
                                + (cos(Omega t/2) - (gamma/Omega) sin(Omega t/2)) p0 ]
      var_t  = (1/beta) [ 1 - e^{-gamma t} (Omega^2 + gamma^2
                          - gamma^2 cos(Omega t) - gamma Omega sin(Omega t)) / Omega^2 ]

    As epsilon -> 0 the variance tends to (1 - e^{-gamma t}) / beta, and as
    t -> infinity to 1/beta.
    """
    for name, v in (("gamma", gamma), ("beta", beta), ("epsilon", epsilon)):
        if not (math.isfinite(v) and v > 0):
            raise ConfigurationError(f"{name} must be positive, got {v!r}")
    if t < 0:
        raise ConfigurationError(f"t must be >= 0, got {t}")
    b_tot = 1.0 + 1.0 / epsilon
    disc = 4.0 * b_tot - gamma * gamma
    if disc <= 0:
        raise RegimeError(
            "closed form requires the oscillatory regime 4(1 + 1/epsilon) > gamma^2; "
            f"got gamma={gamma}, epsilon={epsilon}"
        )
    om = math.sqrt(disc)
    decay_half = math.exp(-0.5 * gamma * t)
    half = 0.5 * om * t
    mean = decay_half * (
        -(2.0 * b_tot / om) * math.sin(half) * q0
        + (math.cos(half) - (gamma / om) * math.sin(half)) * p0
    )
    decay = math.exp(-gamma * t)
    bracket = (
        om * om
        + gamma * gamma
        - gamma * gamma * math.cos(om * t)
        - gamma * om * math.sin(om * t)
    )
    var = (1.0 / beta) * (1.0 - decay * bracket / (om * om))
    return mean, var


def _frobenius_sq_free_block(gamma: float, t: np.ndarray) -> np.ndarray:
    """||exp(K t)||_F^2 per free coordinate pair, K = [[0,1],[0,-gamma]]."""
    e = np.exp(-gamma * t)
    return 1.0 + e * e + ((1.0 - e) / gamma) ** 2


@dataclass(frozen=True)
class BoundCheckReport:
    """Outcome of a matrix-exponential decay/bound verification."""

    alpha: float
    gamma: float
    eta: float
    bound_constant: float
    observed_max: float
    envelope_slope: float | None
    passed: bool


def matrix_exp_bound_check(
    alpha: float, gamma: float, t_grid: np.ndarray
) -> BoundCheckReport:
    """Verify the decay/boundedness of exp(Kt), K = [[0, I], [-alpha I, -gamma I]].

    alpha == 0: checks the uniform bound ||exp(Kt)||_F^2 <= (2 + gamma^-2)
    per coordinate pair on the grid (eta = 0).

    alpha > 0: checks exponential decay at rate eta where
      eta = gamma - sqrt(gamma^2 - 4 alpha)  if gamma^2 > 4 alpha,
      eta = gamma                            if gamma^2 < 4 alpha,
      eta = 0.9 * gamma                      if gamma^2 == 4 alpha
    by fitting the envelope of ||exp(Kt)||_F^2 over windowed maxima in the
    second half of the grid and requiring slope <= -0.95 * eta.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size < 8 or np.any(np.diff(t_grid) <= 0):
        raise ConfigurationError("t_grid must be an increasing 1-D grid with >= 8 points")
    if gamma <= 0:
        raise ConfigurationError(f"gamma must be positive, got {gamma}")
    if alpha < 0:
        raise ConfigurationError(f"alpha must be >= 0, got {alpha}")

    if alpha == 0.0:
        f2 = _frobenius_sq_free_block(gamma, t_grid)
        bound = 2.0 + gamma ** -2
        observed = float(np.max(f2))
        return BoundCheckReport(
            alpha=alpha,
            gamma=gamma,
            eta=0.0,
            bound_constant=bound,
            observed_max=observed,
            envelope_slope=None,
            passed=bool(observed <= bound * (1.0 + 1e-12)),
        )

    disc = gamma * gamma - 4.0 * alpha
    if disc > 0:
        eta = gamma - math.sqrt(disc)
    elif disc < 0:
        eta = gamma
    else:
        eta = 0.9 * gamma

    params = BlockParams(a=1.0, b_tot=alpha, c_tot=gamma)
    f2 = np.array(
        [float(np.sum(block_matrix_exp(params, ti) ** 2)) for ti in t_grid]
    )
    # envelope over windows in the second half of the grid; window width covers
    # at least one oscillation period in the complex regime
    t_mid = 0.5 * (t_grid[0] + t_grid[-1])
    sel = t_grid >= t_mid
    ts, fs = t_grid[sel], f2[sel]
    if disc < 0:
        period = 4.0 * math.pi / math.sqrt(-disc)
    else:
        period = 0.0
    width = max(period, (ts[-1] - ts[0]) / 8.0)
    n_windows = max(3, int((ts[-1] - ts[0]) / width))
    edges = np.linspace(ts[0], ts[-1], n_windows + 1)
    mids, maxima = [], []
    for left, right in zip(edges[:-1], edges[1:]):
        m = (ts >= left) & (ts <= right)
        if np.any(m):
            mids.append(0.5 * (left + right))
            maxima.append(float(np.max(fs[m])))
    mids = np.asarray(mids)
    maxima = np.asarray(maxima)
    slope = float(np.polyfit(mids, np.log(maxima), 1)[0])
    return BoundCheckReport(
        alpha=alpha,
        gamma=gamma,
        eta=eta,
        bound_constant=math.nan,
        observed_max=float(np.max(f2)),
        envelope_slope=slope,
        passed=bool(slope <= -0.95 * eta),
    )
