"""Command-line experiment driver.

Subcommands: converge (rate studies across the softening ladder), steady
(long-run moments vs the limiting targets), selfcheck (closed-form oracle
suite), simulate (raw trajectory dump). All randomness flows from the config
seed; outputs are byte-identical across reruns of the same config and seed.

Exit codes: 0 ok, 1 selfcheck failure, 2 numerical instability,
3 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import warnings
from dataclasses import dataclass, fields

import numpy as np

from . import analytic
from .errors import (
    CapabilityError,
    ConfigurationError,
    InsufficientDataError,
    RegimeError,
    SoftLangevinError,
    StabilityError,
)
from .estimators import ErrorMetric, convergence_study, floor_detect
from .integrate import StepperKind, simulate_ensemble
from .model import MECHANISMS, U_KINDS, MechanismSpec, PotentialSpec, SystemConfig
from .steady import (
    empirical_moments,
    gaussian_w2,
    limit_target,
    prelimit_stationary_gaussian,
    w2_uncertainty,
)

__all__ = ["main", "ExperimentConfig", "run_selfcheck"]

PERTURB_ENV_VAR = "SOFTLANGEVIN_SELFCHECK_PERTURB"

EXIT_OK = 0
EXIT_SELFCHECK = 1
EXIT_STABILITY = 2
EXIT_CONFIG = 3


# --------------------------------------------------------------------------
# experiment configuration
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated contents of a JSON experiment file."""

    d: int
    k: int
    gamma: float
    beta: float
    alpha: float
    u_kind: str
    u_amplitude: float
    mechanism: str
    epsilons: tuple
    q0: tuple
    p0: tuple
    horizon_T: float
    dt: float
    n_paths: int
    metrics: tuple
    seed: int
    format: str
    stepper: str = "exponential_euler"
    eval_time: float | None = None
    burn_in_fraction: float = 0.5
    n_dump_paths: int = 4
    output_path: str = "."

    def system_config(self, epsilon: float | None = None) -> SystemConfig:
        eps = float(self.epsilons[0] if epsilon is None else epsilon)
        return SystemConfig(
            d=self.d,
            k=self.k,
            gamma=self.gamma,
            beta=self.beta,
            potential=PotentialSpec(
                alpha=self.alpha, u_kind=self.u_kind, u_amplitude=self.u_amplitude
            ),
            mechanism=MechanismSpec(self.mechanism, eps),
            q0=np.asarray(self.q0, dtype=float),
            p0=np.asarray(self.p0, dtype=float),
            horizon_T=self.horizon_T,
            dt=self.dt,
        )

    @property
    def stepper_kind(self) -> StepperKind:
        return StepperKind(self.stepper)


def _need(data: dict, key: str, kinds, check=None, what: str = ""):
    if key not in data:
        raise ConfigurationError(f"config field '{key}' is required")
    val = data[key]
    if not isinstance(val, kinds) or isinstance(val, bool):
        raise ConfigurationError(
            f"config field '{key}' must be {what or kinds}, got {type(val).__name__}"
        )
    if check is not None and not check(val):
        raise ConfigurationError(f"config field '{key}' failed validation: {val!r}")
    return val


def parse_experiment_config(data: dict) -> ExperimentConfig:
    """Validate a decoded JSON object field by field."""
    if not isinstance(data, dict):
        raise ConfigurationError("config root must be a JSON object")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigurationError(
            f"config contains unrecognized field(s): {', '.join(unknown)}"
        )
    num = (int, float)
    d = int(_need(data, "d", int, lambda v: v >= 2, "an integer >= 2"))
    k = int(_need(data, "k", int, lambda v: 0 < v < d, "an integer in (0, d)"))
    gamma = float(_need(data, "gamma", num, lambda v: v > 0, "a positive number"))
    beta = float(_need(data, "beta", num, lambda v: v > 0, "a positive number"))
    alpha = float(_need(data, "alpha", num, lambda v: v >= 0, "a number >= 0"))
    u_kind = _need(data, "u_kind", str, lambda v: v in U_KINDS, f"one of {U_KINDS}")
    u_amp = float(data.get("u_amplitude", 0.0))
    mech = _need(data, "mechanism", str, lambda v: v in MECHANISMS, f"one of {MECHANISMS}")
    eps = _need(data, "epsilons", list, lambda v: len(v) >= 1, "a non-empty list")
    eps = [float(e) for e in eps]
    if any(e <= 0 for e in eps):
        raise ConfigurationError("config field 'epsilons' must be all positive")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ConfigurationError("config field 'epsilons' must be strictly decreasing")
    q0 = _need(data, "q0", list, lambda v: len(v) == d, f"a list of length d={d}")
    p0 = _need(data, "p0", list, lambda v: len(v) == d, f"a list of length d={d}")
    horizon = float(_need(data, "horizon_T", num, lambda v: v > 0, "a positive number"))
    dt = float(_need(data, "dt", num, lambda v: 0 < v < horizon, "in (0, horizon_T)"))
    n_paths = int(_need(data, "n_paths", int, lambda v: v >= 100, "an integer >= 100"))
    metric_names = _need(data, "metrics", list, lambda v: len(v) >= 1, "a non-empty list")
    metrics = []
    for name in metric_names:
        try:
            metrics.append(ErrorMetric(str(name)))
        except ValueError:
            raise ConfigurationError(
                f"config field 'metrics' entry {name!r} is not one of "
                f"{[m.value for m in ErrorMetric]}"
            )
    seed = int(_need(data, "seed", int, lambda v: 0 <= v < 2**64, "a 64-bit integer"))
    fmt = _need(data, "format", str, lambda v: v in ("csv", "json"), "'csv' or 'json'")
    stepper = data.get("stepper", "exponential_euler")
    if stepper not in tuple(s.value for s in StepperKind):
        raise ConfigurationError(
            f"config field 'stepper' must be one of "
            f"{[s.value for s in StepperKind]}, got {stepper!r}"
        )
    eval_time = data.get("eval_time")
    if eval_time is not None:
        eval_time = float(eval_time)
        if not (0 < eval_time <= horizon):
            raise ConfigurationError(
                "config field 'eval_time' must lie in (0, horizon_T]"
            )
    burn_in = float(data.get("burn_in_fraction", 0.5))
    if not (0.0 <= burn_in <= 0.9):
        raise ConfigurationError("config field 'burn_in_fraction' must be in [0, 0.9]")
    n_dump = int(data.get("n_dump_paths", 4))
    if n_dump < 1:
        raise ConfigurationError("config field 'n_dump_paths' must be >= 1")
    out = data.get("output_path", ".")
    if not isinstance(out, str):
        raise ConfigurationError("config field 'output_path' must be a string")
    return ExperimentConfig(
        d=d,
        k=k,
        gamma=gamma,
        beta=beta,
        alpha=alpha,
        u_kind=u_kind,
        u_amplitude=u_amp,
        mechanism=mech,
        epsilons=tuple(eps),
        q0=tuple(float(x) for x in q0),
        p0=tuple(float(x) for x in p0),
        horizon_T=horizon,
        dt=dt,
        n_paths=n_paths,
        metrics=tuple(metrics),
        seed=seed,
        format=fmt,
        stepper=stepper,
        eval_time=eval_time,
        burn_in_fraction=burn_in,
        n_dump_paths=min(n_dump, n_paths),
        output_path=out,
    )


def load_experiment_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigurationError(
            f"config {path} is not valid JSON (line {exc.lineno}, col {exc.colno}): "
            f"{exc.msg}"
        )
    return parse_experiment_config(data)


# --------------------------------------------------------------------------
# output helpers
# --------------------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return obj


def _write_json(path: str, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path: str, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_csv_cell(v) for v in row])


def _csv_cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _resolve_out_dir(args, exp: ExperimentConfig) -> str:
    out = args.out if args.out is not None else exp.output_path
    if not os.path.isdir(out):
        raise ConfigurationError(f"output directory {out!r} does not exist")
    return out


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_converge(args) -> int:
    exp = load_experiment_config(args.config)
    seed = args.seed if args.seed is not None else exp.seed
    out = _resolve_out_dir(args, exp)
    if len(exp.epsilons) < 3:
        raise ConfigurationError(
            "config field 'epsilons' needs >= 3 values for a convergence study"
        )
    base = exp.system_config()
    results = []
    notes = set()
    for metric in exp.metrics:
        report = convergence_study(
            base,
            metric,
            exp.epsilons,
            exp.n_paths,
            seed,
            eval_time=exp.eval_time,
            stepper=exp.stepper_kind,
            n_workers=args.threads,
        )
        for est in report.estimates:
            notes.update(est.extras.get("notes", []))
        results.append(
            {
                "mechanism": report.mechanism,
                "metric": metric.value,
                "slope": report.fit.slope,
                "intercept": report.fit.intercept,
                "r_squared": report.fit.r_squared,
                "floor_detected": floor_detect(report),
            }
        )
        rows = [
            (e.epsilon, e.value, e.std_err, e.n_effective) for e in report.estimates
        ]
        _write_csv(
            os.path.join(out, f"converge_{metric.value}.csv"),
            ["epsilon", "estimate", "std_err", "n_paths"],
            rows,
        )
    summary = {
        "command": "converge",
        "mechanism": exp.mechanism,
        "epsilons": list(exp.epsilons),
        "n_paths": exp.n_paths,
        "seed": seed,
        "results": results,
        "notes": sorted(notes),
    }
    _write_json(os.path.join(out, "converge_summary.json"), summary)
    return EXIT_OK


def cmd_steady(args) -> int:
    exp = load_experiment_config(args.config)
    seed = args.seed if args.seed is not None else exp.seed
    out = _resolve_out_dir(args, exp)
    config = exp.system_config(exp.epsilons[-1])

    n_steps = max(1, round(config.horizon_T / config.dt))
    stride = max(1, n_steps // 2000)
    ensemble, _ = simulate_ensemble(
        config,
        exp.n_paths,
        seed,
        stepper=exp.stepper_kind,
        record_stride=stride,
        n_workers=args.threads,
    )
    emp = empirical_moments(ensemble, exp.burn_in_fraction)

    extra = {}
    if exp.mechanism == "infinite_friction_nofd":
        # no nondegenerate limiting law: audit against the fixed-epsilon
        # stationary Gaussian and report how small Var(p1) already is
        target = prelimit_stationary_gaussian(config)
        idx = ensemble.component_labels.index("p1_0")
        extra["empirical_var_p1"] = float(emp.cov[idx, idx])
        extra["var_p1_bound_10eps"] = 10.0 * config.epsilon
    else:
        target = limit_target(config)
    emp_t = emp.subset(target.labels)
    w2 = gaussian_w2(emp_t.to_target(), target)
    unc = w2_uncertainty(emp_t, target)

    moments = []
    for i, label in enumerate(target.labels):
        moments.append(
            {
                "label": label,
                "target_mean": float(target.mean[i]),
                "empirical_mean": float(emp_t.mean[i]),
                "mean_se": float(emp_t.mean_se[i]),
                "target_var": float(target.cov[i, i]),
                "empirical_var": float(emp_t.cov[i, i]),
                "var_se": float(emp_t.cov_se[i, i]),
            }
        )
    summary = {
        "command": "steady",
        "mechanism": exp.mechanism,
        "epsilon": config.epsilon,
        "n_paths": exp.n_paths,
        "seed": seed,
        "burn_in_fraction": exp.burn_in_fraction,
        "target_provenance": target.provenance,
        "w2": w2,
        "w2_uncertainty": unc,
        "moments": moments,
        **extra,
    }
    _write_json(os.path.join(out, "steady_summary.json"), summary)
    if exp.format == "csv":
        _write_csv(
            os.path.join(out, "steady_moments.csv"),
            [
                "label",
                "target_mean",
                "empirical_mean",
                "mean_se",
                "target_var",
                "empirical_var",
                "var_se",
            ],
            [
                (
                    m["label"],
                    m["target_mean"],
                    m["empirical_mean"],
                    m["mean_se"],
                    m["target_var"],
                    m["empirical_var"],
                    m["var_se"],
                )
                for m in moments
            ],
        )
    return EXIT_OK


def cmd_simulate(args) -> int:
    exp = load_experiment_config(args.config)
    seed = args.seed if args.seed is not None else exp.seed
    out = _resolve_out_dir(args, exp)
    config = exp.system_config(exp.epsilons[-1])
    ensemble, _ = simulate_ensemble(
        config,
        exp.n_paths,
        seed,
        stepper=exp.stepper_kind,
        n_workers=args.threads,
    )
    labels = list(ensemble.component_labels)
    n_dump = min(exp.n_dump_paths, ensemble.states.shape[0])
    if exp.format == "csv":
        rows = []
        for p in range(n_dump):
            for it, t in enumerate(ensemble.times):
                rows.append((p, float(t), *ensemble.states[p, it, :]))
        _write_csv(
            os.path.join(out, "trajectories.csv"), ["path", "time", *labels], rows
        )
    else:
        payload = {
            "command": "simulate",
            "mechanism": exp.mechanism,
            "epsilon": config.epsilon,
            "seed": seed,
            "labels": labels,
            "times": ensemble.times,
            "paths": ensemble.states[:n_dump],
        }
        _write_json(os.path.join(out, "trajectories.json"), payload)
    return EXIT_OK


# --------------------------------------------------------------------------
# selfcheck
# --------------------------------------------------------------------------


def _check_identity():
    for params in (
        analytic.BlockParams(1.0, 2.0, 1.0),
        analytic.BlockParams(11.0, 10.0, 11.0),
        analytic.BlockParams(1.0, 0.25, 2.0),
    ):
        err = np.abs(analytic.block_matrix_exp(params, 0.0) - np.eye(2)).max()
        if err > 1e-12:
            return False, f"t=0 deviation {err:.2e}"
    return True, "exp(0) = I on all eigenvalue regimes"


def _check_series():
    worst = 0.0
    import scipy.linalg

    for a, b, c in [
        (1.0, 2.0, 1.0),
        (1.0, 0.2499999, 1.0),
        (1.0, 0.25, 1.0),
        (5.0, 21.0, 2.0),
        (0.05, 0.0, 1.3),
        (1.0, 101.0, 11.0),
    ]:
        params = analytic.BlockParams(a, b, c)
        for t in (0.05, 0.7, 3.0):
            ours = analytic.block_matrix_exp(params, t)
            ref = scipy.linalg.expm(params.drift_matrix() * t)
            worst = max(worst, float(np.abs(ours - ref).max()))
    ok = worst < 1e-9
    return ok, f"max deviation from reference expm {worst:.2e}"


def _check_semigroup():
    perturb = os.environ.get(PERTURB_ENV_VAR, "") == "1"
    worst = 0.0
    for a, b, c in [(1.0, 2.0, 1.0), (1.0, 0.25, 1.0), (2.0, 9.0, 3.0)]:
        params = analytic.BlockParams(a, b, c)
        for t, s in [(0.4, 0.4), (0.15, 1.1)]:
            whole = analytic.block_matrix_exp(params, t + s)
            left = analytic.block_matrix_exp(params, t)
            right = analytic.block_matrix_exp(params, s)
            if perturb:
                right = right.copy()
                right[0, 1] = -right[0, 1]
            worst = max(worst, float(np.abs(whole - left @ right).max()))
    ok = worst < 1e-10
    return ok, f"max |exp((t+s)A) - exp(tA)exp(sA)| = {worst:.2e}"


def _check_free_block_bound():
    rep = analytic.matrix_exp_bound_check(0.0, 0.8, np.linspace(0.0, 12.0, 200))
    detail = (
        f"sup |exp(Kt)|_F^2 = {rep.observed_max:.6f} vs bound {rep.bound_constant:.6f}"
    )
    return rep.passed, detail


def _check_damped_decay():
    rep = analytic.matrix_exp_bound_check(1.0, 1.0, np.linspace(0.0, 30.0, 1200))
    detail = (
        f"envelope slope {rep.envelope_slope:.4f} vs required decay rate "
        f"-{0.95 * rep.eta:.4f}"
    )
    return rep.passed, detail


def _check_variance_quadrature():
    gamma, beta, eps, t = 1.0, 1.0, 0.05, 2.0
    _, var = analytic.ou_spatial_stats(gamma, beta, eps, 0.3, -0.2, t)
    params = analytic.BlockParams(1.0, 1.0 + 1.0 / eps, gamma)
    C = np.array([[0.0], [math.sqrt(2.0 * gamma / beta)]])
    cov = analytic.stochastic_convolution_cov(params.drift_matrix(), C, t)
    err = abs(cov[1, 1] - var)
    return err < 1e-8, f"closed form vs quadrature variance gap {err:.2e}"


def _check_regime_grid():
    import scipy.linalg

    worst = 0.0
    for b in np.linspace(0.05, 2.0, 40):
        params = analytic.BlockParams(1.0, float(b), 1.0)
        ours = analytic.block_matrix_exp(params, 1.7)
        ref = scipy.linalg.expm(params.drift_matrix() * 1.7)
        worst = max(worst, float(np.abs(ours - ref).max()))
    # continuity across the defective band
    near = analytic.block_matrix_exp(analytic.BlockParams(1.0, 0.25 + 1e-9, 1.0), 1.7)
    at = analytic.block_matrix_exp(analytic.BlockParams(1.0, 0.25, 1.0), 1.7)
    jump = float(np.abs(near - at).max())
    ok = worst < 1e-9 and jump < 1e-7
    return ok, f"grid deviation {worst:.2e}, defective-band continuity jump {jump:.2e}"


SELFCHECKS = (
    ("identity-at-zero", _check_identity),
    ("series-comparison", _check_series),
    ("semigroup", _check_semigroup),
    ("free-block-norm-bound", _check_free_block_bound),
    ("damped-block-decay", _check_damped_decay),
    ("variance-quadrature", _check_variance_quadrature),
    ("eigenvalue-regime-grid", _check_regime_grid),
)


def run_selfcheck():
    """Run all closed-form oracle checks; returns [(name, ok, detail)]."""
    results = []
    for name, fn in SELFCHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashing check is a failing check
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        results.append((name, bool(ok), detail))
    return results


def cmd_selfcheck(args) -> int:
    results = run_selfcheck()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    failures = [name for name, ok, _ in results if not ok]
    if failures:
        print(f"selfcheck failed: {', '.join(failures)}", file=sys.stderr)
        return EXIT_SELFCHECK
    return EXIT_OK


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="softlangevin",
        description=(
            "Soft-constrained Langevin dynamics: convergence studies, "
            "steady-state audits, analytic self-checks, trajectory dumps."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--out", default=None, help="output directory (must exist)")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument(
            "--threads",
            type=int,
            default=None,
            help="worker processes (or env LANGEVIN_THREADS)",
        )

    common(sub.add_parser("converge", help="epsilon-ladder convergence study"))
    common(sub.add_parser("steady", help="long-run moments vs limiting target"))
    common(sub.add_parser("simulate", help="raw trajectory dump"))
    p_check = sub.add_parser("selfcheck", help="closed-form oracle suite")
    common(p_check, needs_config=False)
    return parser


_DISPATCH = {
    "converge": cmd_converge,
    "steady": cmd_steady,
    "simulate": cmd_simulate,
    "selfcheck": cmd_selfcheck,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    caught: list = []
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            return _DISPATCH[args.command](args)
    except StabilityError as exc:
        print(f"numerical instability: {exc}", file=sys.stderr)
        return EXIT_STABILITY
    except (
        ConfigurationError,
        CapabilityError,
        RegimeError,
        InsufficientDataError,
    ) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SoftLangevinError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    finally:
        seen = set()
        for w in caught:
            text = str(w.message)
            if text not in seen:
                seen.add(text)
                print(f"warning: {text}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
