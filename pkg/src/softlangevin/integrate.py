"""Time stepping with reproducible counter-based noise.

Two schemes:

* Euler–Maruyama: x' = x + drift(x) dt + noise_matrix @ dW. Explicit; for the
  stiff mechanisms it requires dt <= epsilon/5 (enforced with a warning and an
  automatic switch to the exponential scheme at the engine level).
* Exponential Euler: the system is split as dZ = (A Z + f(Z)) dt + C dW with A
  holding every linear-in-state term (mechanism coefficients, friction, the
  quadratic part of the potential) and f the frozen remainder (gradient of the
  bounded nonlinearity, plus constants from frozen coordinates). One step maps

      Z' = e^{A dt} Z + J(dt) f(Z) + L xi,   L L^T = int_0^dt e^{As} C C^T e^{A^T s} ds

  which is exact in law — jointly for a coupled (pre-limit, limit) pair —
  whenever the potential is quadratic.

Coupling: pre-limit and limit systems are advanced as one combined state so
that shared driver slots (all of W2, plus W1 where the limit consumes it) use
identical Gaussians by construction.

Reproducibility: every (master_seed, path_index, driver_slot) triple keys its
own Philox counter stream, so results are bitwise identical for any chunking
or worker count, and coupled systems can be re-run component by component.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.linalg import expm

from .analytic import integrated_exp, psd_sqrt_factor, stochastic_convolution_cov
from .dynamics import LimitSystem, SdeSystem, build_limit, build_prelimit
from .errors import CapabilityError, ConfigurationError, StabilityError
from .model import (
    PathEnsemble,
    SystemConfig,
    eval_potential_gradient,
    mechanism_coefficients,
    potential_quadratic_hessian,
)

__all__ = [
    "StepperKind",
    "NoiseStream",
    "ExponentialUpdate",
    "step_euler_maruyama",
    "step_exponential",
    "simulate_coupled_pair",
    "simulate_ensemble",
    "run_collected",
    "resolve_workers",
    "THREADS_ENV_VAR",
]

THREADS_ENV_VAR = "LANGEVIN_THREADS"

#: memory cap (bytes) for one chunk's pre-drawn Gaussian block
_CHUNK_BYTES = 2 * 10**8

#: Philox key tag so streams cannot collide with other uses of the seed
_KEY_TAG = 0x736C  # 16-bit stream-domain tag ("sl")


class StepperKind(str, Enum):
    EULER_MARUYAMA = "euler_maruyama"
    EXPONENTIAL_EULER = "exponential_euler"


def _normalize_stepper(stepper) -> StepperKind:
    if isinstance(stepper, StepperKind):
        return stepper
    try:
        return StepperKind(str(stepper))
    except ValueError:
        raise ConfigurationError(
            f"stepper must be one of {[s.value for s in StepperKind]}, got {stepper!r}"
        )


def resolve_workers(n_workers=None) -> int:
    """Worker count: explicit argument, else LANGEVIN_THREADS, else cpu count."""
    if n_workers is not None:
        n = int(n_workers)
    else:
        env = os.environ.get(THREADS_ENV_VAR)
        n = int(env) if env else (os.cpu_count() or 1)
    if n < 1:
        raise ConfigurationError(f"worker count must be >= 1, got {n}")
    return n


class NoiseStream:
    """Counter-based Gaussian source for one simulated path.

    Each (master_seed, path_index, driver_slot) triple keys an independent
    Philox stream; `gaussians` is therefore a pure function of its arguments
    and identical no matter how paths are batched or scheduled.
    """

    def __init__(self, master_seed: int, path_index: int):
        self.master_seed = int(master_seed) & 0xFFFFFFFFFFFFFFFF
        self.path_index = int(path_index)
        if self.path_index < 0:
            raise ConfigurationError("path_index must be >= 0")

    def _generator(self, slot_index: int) -> np.random.Generator:
        # Philox takes a 128-bit key as two 64-bit words: the master seed and
        # a (tag | path | slot) word. Slots use the low 10 bits, path indices
        # the next 38, leaving the tag clear of both.
        slot_index = int(slot_index)
        if not (0 <= slot_index < 1 << 10):
            raise ConfigurationError(f"driver slot {slot_index} out of range")
        if self.path_index >= 1 << 38:
            raise ConfigurationError(f"path index {self.path_index} out of range")
        word = (_KEY_TAG << 48) | (self.path_index << 10) | slot_index
        key = np.array([self.master_seed, word], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def gaussians(self, slot_index: int, n_steps: int, per_step: int = 1) -> np.ndarray:
        """(n_steps, per_step) standard normals for one driver slot."""
        return self._generator(slot_index).standard_normal((n_steps, per_step))

    def increments(self, slot_index: int, n_steps: int, dt: float) -> np.ndarray:
        """Brownian increments W_{t+dt} - W_t for one driver slot."""
        return self.gaussians(slot_index, n_steps, 1)[:, 0] * math.sqrt(dt)


def step_euler_maruyama(sde: SdeSystem, x, t: float, dt: float, increments) -> np.ndarray:
    """One explicit step x' = x + drift(x, t) dt + noise_matrix @ dW.

    `increments` holds the Brownian increments (already scaled by sqrt(dt)),
    one per driver slot, vectorised over leading axes.
    """
    if dt <= 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    x = np.asarray(x, dtype=float)
    dw = np.asarray(increments, dtype=float)
    if dw.shape[-1] != len(sde.driver_slots):
        raise ConfigurationError(
            f"got {dw.shape[-1]} increments for {len(sde.driver_slots)} driver slots"
        )
    with np.errstate(over="ignore", invalid="ignore"):
        out = x + sde.drift(x, t) * dt + dw @ sde.noise_matrix.T
    if out.ndim == 1 and not np.all(np.isfinite(out)):
        raise StabilityError("non-finite state after Euler-Maruyama step", n_bad=1, n_paths=1)
    return out


# ---------------------------------------------------------------------------
# combined linear-part assembly for the exponential scheme
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class _IndexMaps:
    """Index arrays into the combined state Z = [pre (2d), limit (...)]."""

    pre_q1: np.ndarray
    pre_q2: np.ndarray
    pre_p1: np.ndarray
    pre_p2: np.ndarray
    lim_q1: np.ndarray | None  # surviving constrained position (zero_mass)
    lim_p1: np.ndarray | None  # surviving constrained momentum (infinite_mass)
    lim_q2: np.ndarray | None
    lim_p2: np.ndarray | None


def _index_maps(config: SystemConfig, with_limit: bool) -> _IndexMaps:
    d, k = config.d, config.k
    nf = d - k
    pre_q1 = np.arange(0, k)
    pre_q2 = np.arange(k, d)
    pre_p1 = np.arange(d, d + k)
    pre_p2 = np.arange(d + k, 2 * d)
    lim_q1 = lim_p1 = lim_q2 = lim_p2 = None
    if with_limit:
        base = 2 * d
        kind = config.mechanism.kind
        if kind == "zero_mass":
            lim_q1 = base + np.arange(k)
            lim_q2 = base + k + np.arange(nf)
            lim_p2 = base + k + nf + np.arange(nf)
        elif kind == "infinite_mass":
            lim_p1 = base + np.arange(k)
            lim_q2 = base + k + np.arange(nf)
            lim_p2 = base + k + nf + np.arange(nf)
        else:
            lim_q2 = base + np.arange(nf)
            lim_p2 = base + nf + np.arange(nf)
    return _IndexMaps(pre_q1, pre_q2, pre_p1, pre_p2, lim_q1, lim_p1, lim_q2, lim_p2)


class _CombinedModel:
    """A, C, constant drift and frozen-gradient residual of the joint system."""

    def __init__(self, config: SystemConfig, limit: LimitSystem | None):
        d, k = config.d, config.k
        nf = d - k
        gamma, beta = config.gamma, config.beta
        co = mechanism_coefficients(config.mechanism)
        pot = config.potential
        kind = config.mechanism.kind
        with_limit = limit is not None
        self.config = config
        self.limit = limit
        self.ix = _index_maps(config, with_limit)

        dim_lim = limit.sde.dim if with_limit else 0
        s = 2 * d + dim_lim
        self.dim = s
        quad = pot.is_quadratic()
        # quadratic part of the Hessian of V (alpha I, plus pair_spring terms)
        if quad:
            hess = potential_quadratic_hessian(pot, d, k)
        else:
            hess = pot.alpha * np.eye(d)
        K11, K12 = hess[:k, :k], hess[:k, k:]
        K21, K22 = hess[k:, :k], hess[k:, k:]

        A = np.zeros((s, s))
        C = np.zeros((s, d))
        f_const = np.zeros(s)
        ix = self.ix
        sbar = math.sqrt(2.0 * gamma / beta)

        # pre-limit block
        A[ix.pre_q1, ix.pre_p1] = co.a
        A[ix.pre_q2, ix.pre_p2] = 1.0
        A[np.ix_(ix.pre_p1, ix.pre_q1)] = -K11
        A[np.ix_(ix.pre_p1, ix.pre_q2)] = -K12
        A[ix.pre_p1, ix.pre_q1] += -co.b
        A[ix.pre_p1, ix.pre_p1] += -co.c * gamma
        A[np.ix_(ix.pre_p2, ix.pre_q1)] = -K21
        A[np.ix_(ix.pre_p2, ix.pre_q2)] = -K22
        A[ix.pre_p2, ix.pre_p2] = -gamma
        C[ix.pre_p1, np.arange(k)] = co.sigma1_scale * sbar
        C[ix.pre_p2, k + np.arange(nf)] = sbar

        w = np.array(config.q0[:k], dtype=float)  # frozen constrained position
        if with_limit:
            if ix.lim_q2 is None:
                raise ConfigurationError("limit index maps missing free block")
            A[ix.lim_q2, ix.lim_p2] = 1.0
            A[np.ix_(ix.lim_p2, ix.lim_q2)] = -K22
            A[ix.lim_p2, ix.lim_p2] = -gamma
            C[ix.lim_p2, k + np.arange(nf)] = sbar
            if kind == "zero_mass":
                A[np.ix_(ix.lim_q1, ix.lim_q1)] = -K11 / gamma
                A[np.ix_(ix.lim_q1, ix.lim_q2)] = -K12 / gamma
                A[np.ix_(ix.lim_p2, ix.lim_q1)] = -K21
                C[ix.lim_q1, np.arange(k)] = math.sqrt(2.0 / (beta * gamma))
            elif kind == "infinite_mass":
                A[np.ix_(ix.lim_p1, ix.lim_q2)] = -K12
                f_const[ix.lim_p1] = -(K11 @ w)
                f_const[ix.lim_p2] += -(K21 @ w)
                C[ix.lim_p1, np.arange(k)] = sbar
            elif kind in ("infinite_friction_fd", "infinite_friction_nofd"):
                f_const[ix.lim_p2] += -(K21 @ w)
            else:  # confinements freeze q1 at 0: no constant force
                pass

        self.A = A
        self.C = C
        self.f_const = f_const
        self.is_linear = quad
        self._w = w
        self._kind = kind
        self._k, self._d, self._nf = k, d, nf
        self._pot = pot
        self._gamma = gamma

    # -- frozen-gradient residual (the non-quadratic part of grad U) -------

    def residual(self, Z: np.ndarray) -> np.ndarray | None:
        """f(Z) = constant force + frozen grad-U terms, or None when linear."""
        if self.is_linear:
            return None
        pot, k, d, nf = self._pot, self._k, self._d, self._nf
        ix = self.ix
        out = np.broadcast_to(self.f_const, Z.shape[:-1] + (self.dim,)).copy()
        # residual potential: U only (alpha handled in A)
        from .model import PotentialSpec

        upot = PotentialSpec(0.0, pot.u_kind, pot.u_amplitude)
        q_pre = Z[..., : d]
        g_pre = eval_potential_gradient(upot, q_pre, k)
        out[..., ix.pre_p1] += -g_pre[..., :k]
        out[..., ix.pre_p2] += -g_pre[..., k:]
        if self.limit is not None:
            q_full = np.empty(Z.shape[:-1] + (d,))
            if self._kind == "zero_mass":
                q_full[..., :k] = Z[..., ix.lim_q1]
            elif self._kind in ("infinite_mass", "infinite_friction_fd", "infinite_friction_nofd"):
                q_full[..., :k] = self._w
            else:
                q_full[..., :k] = 0.0
            q_full[..., k:] = Z[..., ix.lim_q2]
            g_lim = eval_potential_gradient(upot, q_full, k)
            if self._kind == "zero_mass":
                out[..., ix.lim_q1] += -g_lim[..., :k] / self._gamma
            elif self._kind == "infinite_mass":
                out[..., ix.lim_p1] += -g_lim[..., :k]
            out[..., ix.lim_p2] += -g_lim[..., k:]
        return out

    def drift(self, Z: np.ndarray) -> np.ndarray:
        """Full combined drift A Z + f(Z) (used by the Euler-Maruyama mode)."""
        base = Z @ self.A.T
        res = self.residual(Z)
        if res is None:
            return base + self.f_const
        return base + res

    def initial_state(self, n_paths: int) -> np.ndarray:
        cfg = self.config
        x0 = np.concatenate([cfg.q0, cfg.p0])
        if self.limit is not None:
            x0 = np.concatenate([x0, self.limit.x0])
        return np.tile(x0, (n_paths, 1))

    # -- noise layout -------------------------------------------------------

    def slot_gaussian_dims(self, stepper: StepperKind) -> list[int]:
        """How many fresh Gaussians each driver slot contributes per step."""
        d, k, nf = self._d, self._k, self._nf
        if stepper is StepperKind.EULER_MARUYAMA:
            return [1] * d
        with_limit = self.limit is not None
        kind = self._kind
        per_w1 = 2
        if with_limit and kind in ("zero_mass", "infinite_mass"):
            per_w1 = 3
        per_w2 = 4 if with_limit else 2
        return [per_w1] * k + [per_w2] * nf


@dataclass(frozen=True, eq=False)
class ExponentialUpdate:
    """Precomputed exact affine one-step map Z' = Phi Z + J f(Z) + L xi."""

    Phi: np.ndarray
    J: np.ndarray
    L: np.ndarray
    dt: float

    @classmethod
    def from_linear_parts(cls, A, C, dt: float) -> "ExponentialUpdate":
        if dt <= 0:
            raise ConfigurationError(f"dt must be positive, got {dt}")
        A = np.asarray(A, dtype=float)
        Phi = expm(A * dt)
        J = integrated_exp(A, dt)
        cov = stochastic_convolution_cov(A, C, dt)
        L = psd_sqrt_factor(cov)
        return cls(Phi=Phi, J=J, L=L, dt=dt)

    def step(self, Z: np.ndarray, gaussians: np.ndarray, frozen_drift=None) -> np.ndarray:
        out = Z @ self.Phi.T + gaussians @ self.L.T
        if frozen_drift is not None:
            out += frozen_drift @ self.J.T
        return out


def step_exponential(update: ExponentialUpdate, x, gaussians, frozen_drift=None) -> np.ndarray:
    """Apply one exact-linear exponential step (see ExponentialUpdate)."""
    return update.step(np.asarray(x, dtype=float), np.asarray(gaussians, dtype=float), frozen_drift)


# ---------------------------------------------------------------------------
# engine
# ---------------------------------------------------------------------------


def _resolve_grid(config: SystemConfig):
    n_steps = max(1, int(round(config.horizon_T / config.dt)))
    dt_eff = config.horizon_T / n_steps
    if abs(n_steps * config.dt - config.horizon_T) > 1e-9 * config.horizon_T:
        # dt does not divide T; snap to the nearest dividing value
        warnings.warn(
            f"dt={config.dt} does not divide horizon_T={config.horizon_T}; "
            f"using dt={dt_eff}",
            stacklevel=3,
        )
    return n_steps, dt_eff


def _stepper_with_guard(config: SystemConfig, stepper) -> tuple[StepperKind, list[str]]:
    stepper = _normalize_stepper(stepper)
    notes = []
    if stepper is StepperKind.EULER_MARUYAMA:
        eps = config.mechanism.epsilon
        if config.dt > eps / 5.0:
            msg = (
                f"Euler-Maruyama with dt={config.dt} exceeds epsilon/5={eps / 5.0:g} "
                f"for mechanism {config.mechanism.kind}; switching to the "
                "exponential stepper"
            )
            warnings.warn(msg, stacklevel=3)
            notes.append(msg)
            stepper = StepperKind.EXPONENTIAL_EULER
    return stepper, notes


def _chunk_ranges(n_paths: int, n_steps: int, z_dim: int):
    per_path = max(1, n_steps * z_dim * 8)
    chunk = int(max(64, min(n_paths, _CHUNK_BYTES // per_path)))
    lo = 0
    out = []
    while lo < n_paths:
        hi = min(n_paths, lo + chunk)
        out.append((lo, hi))
        lo = hi
    return out


def _draw_gaussian_block(master_seed, path_lo, path_hi, slot_dims, n_steps):
    """(n_chunk, n_steps, sum(slot_dims)) block of per-path-slot Gaussians."""
    n = path_hi - path_lo
    total = int(sum(slot_dims))
    out = np.empty((n, n_steps, total))
    for i in range(n):
        stream = NoiseStream(master_seed, path_lo + i)
        col = 0
        for slot, per in enumerate(slot_dims):
            out[i, :, col : col + per] = stream.gaussians(slot, n_steps, per)
            col += per
    return out


def _run_chunk(task):
    """Advance one chunk of paths; return requested per-path reductions."""
    (
        config,
        with_limit,
        stepper_value,
        master_seed,
        path_lo,
        path_hi,
        collect,
        record_stride,
    ) = task
    stepper = StepperKind(stepper_value)
    limit = build_limit(config) if with_limit else None
    model = _CombinedModel(config, limit)
    n_steps, dt = _resolve_grid(config)
    n = path_hi - path_lo
    s = model.dim
    ix = model.ix

    slot_dims = model.slot_gaussian_dims(stepper)
    gauss = _draw_gaussian_block(master_seed, path_lo, path_hi, slot_dims, n_steps)

    if stepper is StepperKind.EXPONENTIAL_EULER:
        update = ExponentialUpdate.from_linear_parts(model.A, model.C, dt)
        linear = model.is_linear
        if linear:
            jf = model.f_const @ update.J.T
    else:
        sqrt_dt = math.sqrt(dt)

    Z = model.initial_state(n)
    alive = np.ones(n, dtype=bool)

    want_traj = "trajectory" in collect
    want_sup = "sup_unconstrained" in collect
    want_trapz = "trapz_p1" in collect
    snap_steps = collect.get("snapshots", ())
    snaps = {}

    if want_traj:
        rec_idx = list(range(0, n_steps + 1, record_stride))
        if rec_idx[-1] != n_steps:
            rec_idx.append(n_steps)
        traj = np.empty((n, len(rec_idx), s))
        traj[:, 0] = Z
        rec_pos = 1
    if want_sup:
        if ix.lim_q2 is None:
            raise CapabilityError("sup_unconstrained requires a coupled limit system")
        sup_cols_pre = np.concatenate([ix.pre_q2, ix.pre_p2])
        sup_cols_lim = np.concatenate([ix.lim_q2, ix.lim_p2])
        sup_val = np.zeros(n)
    if want_trapz:
        trapz = np.zeros((n, len(ix.pre_p1)))
        prev_p1 = Z[:, ix.pre_p1].copy()
    if 0 in snap_steps:
        snaps[0] = Z.copy()

    check_every = 25
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(1, n_steps + 1):
            g = gauss[:, step - 1, :]
            if stepper is StepperKind.EXPONENTIAL_EULER:
                if linear:
                    Z = Z @ update.Phi.T + jf + g @ update.L.T
                else:
                    f = model.residual(Z)
                    Z = Z @ update.Phi.T + f @ update.J.T + g @ update.L.T
            else:
                Z = Z + model.drift(Z) * dt + (g[:, : model.C.shape[1]] * sqrt_dt) @ model.C.T

            if step % check_every == 0 or step == n_steps:
                finite = np.isfinite(Z).all(axis=1)
                newly_bad = alive & ~finite
                if np.any(newly_bad):
                    alive &= finite
                    Z[~alive] = np.nan
                    frac_bad = 1.0 - alive.mean()
                    if frac_bad > 0.001 and not collect.get("tolerate_blowup", False):
                        raise StabilityError(
                            f"{(~alive).sum()} of {n} paths in chunk [{path_lo},{path_hi}) "
                            f"blew up by step {step} (dt={dt:g}, "
                            f"mechanism={config.mechanism.kind}, eps={config.epsilon:g})",
                            n_bad=int((~alive).sum()),
                            n_paths=n,
                            step_index=step,
                        )
            if want_sup:
                diff = Z[:, sup_cols_pre] - Z[:, sup_cols_lim]
                np.maximum(sup_val, np.linalg.norm(diff, axis=1), out=sup_val)
            if want_trapz:
                cur_p1 = Z[:, ix.pre_p1]
                trapz += 0.5 * dt * (prev_p1 + cur_p1)
                prev_p1 = cur_p1.copy()
            if want_traj and rec_pos < len(rec_idx) and step == rec_idx[rec_pos]:
                traj[:, rec_pos] = Z
                rec_pos += 1
            if step in snap_steps:
                snaps[step] = Z.copy()

    out = {"alive": alive}
    if want_traj:
        out["trajectory"] = traj
        out["rec_steps"] = np.asarray(rec_idx)
    if want_sup:
        out["sup_unconstrained"] = sup_val
    if want_trapz:
        out["trapz_p1"] = trapz
    if snap_steps:
        out["snapshots"] = snaps
    out["final"] = Z
    return out


def run_collected(
    config: SystemConfig,
    n_paths: int,
    master_seed: int,
    stepper=StepperKind.EXPONENTIAL_EULER,
    with_limit: bool = False,
    collect: dict | None = None,
    record_stride: int = 1,
    n_workers=None,
):
    """Advance an ensemble and return per-path reductions, merged in path order.

    `collect` keys: "trajectory" (bool), "sup_unconstrained" (bool),
    "trapz_p1" (bool), "snapshots" (iterable of step indices),
    "tolerate_blowup" (bool). The returned dict contains the merged arrays
    plus "alive", "stepper_used", "notes", "n_steps", "dt".
    """
    if n_paths < 1:
        raise ConfigurationError("n_paths must be >= 1")
    collect = dict(collect or {})
    stepper, notes = _stepper_with_guard(config, stepper)
    limit = build_limit(config) if with_limit else None
    model = _CombinedModel(config, limit)
    n_steps, dt = _resolve_grid(config)
    slot_dims = model.slot_gaussian_dims(stepper)
    z_dim = sum(slot_dims)
    snap_steps = tuple(sorted(set(int(i) for i in collect.get("snapshots", ()))))
    for i in snap_steps:
        if not (0 <= i <= n_steps):
            raise ConfigurationError(f"snapshot step {i} outside grid 0..{n_steps}")
    collect["snapshots"] = snap_steps

    tasks = [
        (
            config,
            with_limit,
            stepper.value,
            int(master_seed),
            lo,
            hi,
            collect,
            int(record_stride),
        )
        for lo, hi in _chunk_ranges(n_paths, n_steps, z_dim)
    ]
    n_workers = resolve_workers(n_workers)
    if n_workers == 1 or len(tasks) == 1:
        parts = [_run_chunk(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(n_workers, len(tasks))) as pool:
            parts = list(pool.map(_run_chunk, tasks))

    merged: dict = {
        "stepper_used": stepper.value,
        "notes": notes,
        "n_steps": n_steps,
        "dt": dt,
    }
    for key in ("alive", "final", "trajectory", "sup_unconstrained", "trapz_p1"):
        if key in parts[0]:
            merged[key] = np.concatenate([p[key] for p in parts], axis=0)
    if "rec_steps" in parts[0]:
        merged["rec_steps"] = parts[0]["rec_steps"]
    if snap_steps:
        merged["snapshots"] = {
            i: np.concatenate([p["snapshots"][i] for p in parts], axis=0)
            for i in snap_steps
        }
    merged["index_maps"] = model.ix
    merged["limit"] = limit
    n_bad = int((~merged["alive"]).sum())
    if n_bad > 0.001 * n_paths:
        raise StabilityError(
            f"{n_bad} of {n_paths} paths blew up",
            n_bad=n_bad,
            n_paths=n_paths,
        )
    return merged


def _split_labels(config: SystemConfig, limit: LimitSystem | None):
    pre = build_prelimit(config)
    labels_pre = pre.component_labels
    labels_lim = limit.sde.component_labels if limit is not None else ()
    return labels_pre, labels_lim


def simulate_ensemble(
    config: SystemConfig,
    n_paths: int,
    master_seed: int,
    stepper=StepperKind.EXPONENTIAL_EULER,
    with_limit: bool = False,
    record_stride: int = 1,
    n_workers=None,
):
    """Simulate full trajectories; returns (pre_ensemble, limit_ensemble|None)."""
    res = run_collected(
        config,
        n_paths,
        master_seed,
        stepper=stepper,
        with_limit=with_limit,
        collect={"trajectory": True},
        record_stride=record_stride,
        n_workers=n_workers,
    )
    limit = res["limit"]
    labels_pre, labels_lim = _split_labels(config, limit)
    times = res["rec_steps"] * res["dt"]
    traj = res["trajectory"]
    d2 = 2 * config.d
    pre = PathEnsemble(
        times=times,
        states=traj[:, :, :d2],
        component_labels=labels_pre,
        master_seed=int(master_seed),
        stepper=res["stepper_used"],
    )
    lim_ens = None
    if with_limit:
        lim_ens = PathEnsemble(
            times=times,
            states=traj[:, :, d2:],
            component_labels=labels_lim,
            master_seed=int(master_seed),
            stepper=res["stepper_used"],
        )
    return pre, lim_ens


def simulate_coupled_pair(
    config: SystemConfig,
    limit: LimitSystem | None = None,
    stepper=StepperKind.EXPONENTIAL_EULER,
    master_seed: int = 0,
    path_index: int = 0,
    record_stride: int = 1,
):
    """One pre-limit path and its shared-noise limit path on a common grid.

    The limit system consumes the same W2 increments as the pre-limit system
    (and the same W1 where it appears in the limit); `limit` defaults to
    build_limit(config).
    """
    if limit is None:
        limit = build_limit(config)
    else:
        expected = build_limit(config)
        if limit.mechanism_kind != config.mechanism.kind or limit.sde.dim != expected.sde.dim:
            raise ConfigurationError(
                "limit system does not match the configured mechanism"
            )
    # run a single path at the requested path_index by shifting the chunk
    stepper_used, _ = _stepper_with_guard(config, stepper)
    res_one = _run_chunk(
        (
            config,
            True,
            stepper_used.value,
            int(master_seed),
            int(path_index),
            int(path_index) + 1,
            {"trajectory": True, "snapshots": ()},
            int(record_stride),
        )
    )
    n_steps, dt = _resolve_grid(config)
    times = res_one["rec_steps"] * dt
    traj = res_one["trajectory"]
    labels_pre, labels_lim = _split_labels(config, limit)
    d2 = 2 * config.d
    stepper_used = stepper_used.value
    pre = PathEnsemble(
        times=times,
        states=traj[:, :, :d2],
        component_labels=labels_pre,
        master_seed=int(master_seed),
        stepper=stepper_used,
    )
    lim = PathEnsemble(
        times=times,
        states=traj[:, :, d2:],
        component_labels=labels_lim,
        master_seed=int(master_seed),
        stepper=stepper_used,
    )
    return pre, lim
