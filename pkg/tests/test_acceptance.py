"""Acceptance gate: twelve numbered criteria, one printed verdict line each.

Default benchmark throughout: d=2, k=1, gamma=1, beta=1, quadratic-plus-U
potential, 10^4 Monte Carlo paths unless a criterion states otherwise. Run
with `pytest -s tests/test_acceptance.py` to see the verdict lines inline.
"""

import json
import math

import numpy as np
import pytest

from softlangevin import (
    BlockParams,
    ErrorMetric,
    MechanismSpec,
    PotentialSpec,
    SystemConfig,
    block_matrix_exp,
    cli,
    convergence_study,
    empirical_moments,
    estimate_metric,
    floor_detect,
    limit_target,
    matrix_exp_bound_check,
    ou_spatial_stats,
    prelimit_stationary_gaussian,
    simulate_ensemble,
    two_body_config,
    uniform_in_time_check,
)
from softlangevin.integrate import run_collected

from _oracles import series_expm

N_PATHS = 10_000
LADDER = (0.2, 0.1, 0.05, 0.025)


def _verdict(num: int, name: str, ok: bool, detail: str = ""):
    line = f"criterion {num:02d} {name}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f"  [{detail}]"
    print(line, flush=True)
    assert ok, line


def _config(kind, eps, alpha, u_kind, u_amp, q0, p0, horizon, dt):
    return SystemConfig(
        d=2,
        k=1,
        gamma=1.0,
        beta=1.0,
        potential=PotentialSpec(alpha=alpha, u_kind=u_kind, u_amplitude=u_amp),
        mechanism=MechanismSpec(kind, eps),
        q0=np.asarray(q0, dtype=float),
        p0=np.asarray(p0, dtype=float),
        horizon_T=horizon,
        dt=dt,
    )


def _final_p1_variance(config, n_paths, seed):
    res = run_collected(config, n_paths, seed)
    p1 = res["final"][res["alive"]][:, res["index_maps"].pre_p1[0]]
    dev2 = (p1 - p1.mean()) ** 2
    return float(dev2.mean()), float(dev2.std(ddof=1) / math.sqrt(dev2.size))


def test_criterion_01_analytic_oracles():
    rng = np.random.default_rng(311)
    max_series = 0.0
    max_semigroup = 0.0
    for _ in range(1000):
        mode = rng.integers(4)
        a = float(rng.uniform(0.1, 5.0))
        b = float(rng.uniform(0.0, 30.0))
        c = float(rng.uniform(0.05, 10.0))
        if mode == 1:  # push toward the critically damped seam
            c = 2.0 * math.sqrt(max(a * b, 1e-12)) + float(rng.normal(0, 1e-7))
            c = max(c, 1e-3)
        elif mode == 2:  # strongly overdamped
            c = 2.0 * math.sqrt(a * b) + float(rng.uniform(1.0, 8.0))
        params = BlockParams(a, b, c)
        t = float(rng.uniform(0.0, 50.0 if mode == 3 else 5.0))
        got = block_matrix_exp(params, t)
        want = series_expm(params.drift_matrix() * t)
        max_series = max(max_series, float(np.abs(got - want).max()))
        s = float(rng.uniform(0.0, 3.0))
        lhs = block_matrix_exp(params, t + s)
        rhs = block_matrix_exp(params, t) @ block_matrix_exp(params, s)
        max_semigroup = max(max_semigroup, float(np.abs(lhs - rhs).max()))

    grid = np.linspace(0.0, 50.0, 501)
    bound_ok = True
    worst = ""
    for gamma in (0.5, 1.0, 3.0):
        free = BlockParams(1.0, 0.0, gamma)
        cap = (2 - 1) * (2.0 + gamma**-2)  # (d - k) free coordinates
        for t in grid:
            fro2 = (2 - 1) * float(
                np.sum(block_matrix_exp(free, float(t)) ** 2)
            )
            if fro2 > cap + 1e-12:
                bound_ok = False
                worst = f"gamma={gamma} t={t:g} F2={fro2:.6f} cap={cap:.6f}"
                break
        rep = matrix_exp_bound_check(0.0, gamma, grid)
        bound_ok = bound_ok and rep.passed

    ok = max_series < 1e-10 and max_semigroup < 1e-10 and bound_ok
    _verdict(
        1,
        "analytic-oracles",
        ok,
        f"series {max_series:.2e}, semigroup {max_semigroup:.2e}"
        + (f", bound violated at {worst}" if worst else ""),
    )


def test_criterion_02_closed_form_momentum_variance():
    checks = []
    for eps in (0.1, 0.01):
        for t in (1.0, 5.0):
            cfg = _config(
                "spatial_confinement", eps, 1.0, "zero", 0.0,
                [0.0, 0.0], [0.0, 0.0], t, 0.05,
            )
            var, se = _final_p1_variance(cfg, 20_000, 42)
            _, want = ou_spatial_stats(1.0, 1.0, eps, 0.0, 0.0, t)
            checks.append(abs(var - want) <= 3.0 * se)
    _, var_lim = ou_spatial_stats(1.0, 1.0, 1e-3, 0.0, 0.0, 5.0)
    gap = abs(var_lim - (1.0 - math.exp(-5.0)))
    ok = all(checks) and gap < 1e-3
    _verdict(
        2,
        "closed-form-momentum-variance",
        ok,
        f"{sum(checks)}/4 within 3 SE, small-eps gap {gap:.2e}",
    )


def test_criterion_03_phase_space_rate():
    cfg = _config(
        "phase_space_confinement", LADDER[0], 1.0, "cosine", 0.5,
        [1.0, 0.0], [1.0, 0.0], 1.0, 0.002,
    )
    slopes = {}
    floors = {}
    for metric in (ErrorMetric.POINTWISE_L2_Q1, ErrorMetric.POINTWISE_L2_P1):
        rep = convergence_study(cfg, metric, LADDER, N_PATHS, 313)
        slopes[metric.value] = rep.fit.slope
        floors[metric.value] = floor_detect(rep)
    ok = all(0.7 <= s <= 1.3 for s in slopes.values()) and not any(
        floors.values()
    )
    _verdict(
        3,
        "phase-space-confinement-rate",
        ok,
        ", ".join(f"{k} slope {v:.3f}" for k, v in slopes.items()),
    )


def test_criterion_04_spatial_dichotomy():
    pinned = _config(
        "spatial_confinement", LADDER[0], 1.0, "cosine", 0.5,
        [0.0, 0.0], [1.0, 0.0], 1.0, 0.002,
    )
    rep0 = convergence_study(
        pinned, ErrorMetric.POINTWISE_L2_Q1, LADDER, N_PATHS, 314
    )
    displaced = pinned.replace(q0=np.array([1.0, 0.0]))
    rep1 = convergence_study(
        displaced, ErrorMetric.POINTWISE_L2_Q1, LADDER, N_PATHS, 314
    )
    floor_vals = np.asarray(rep1.values)
    ok = (
        0.7 <= rep0.fit.slope <= 1.3
        and floor_detect(rep1)
        and bool(np.all(floor_vals > 0.05))
    )
    _verdict(
        4,
        "spatial-confinement-dichotomy",
        ok,
        f"pinned slope {rep0.fit.slope:.3f}, displaced floor "
        f"{floor_detect(rep1)} min {floor_vals.min():.3f}",
    )


def test_criterion_05_integrated_momentum_decay():
    vals = {}
    for eps in (0.1, 0.01):
        cfg = _config(
            "spatial_confinement", eps, 1.0, "zero", 0.0,
            [0.0, 0.0], [0.0, 0.0], 1.0, 0.002,
        )
        est = estimate_metric(cfg, ErrorMetric.INTEGRAL_P1_L2, N_PATHS, 315)
        vals[eps] = est.value
    ok = vals[0.01] < 0.5 * vals[0.1]
    _verdict(
        5,
        "integrated-momentum-decay",
        ok,
        f"0.01:{vals[0.01]:.2e} vs 0.1:{vals[0.1]:.2e}",
    )


def test_criterion_06_pathwise_sup_monotone():
    cases = [
        ("spatial_confinement", [0.0, 0.0]),
        ("phase_space_confinement", [0.0, 0.0]),
        ("phase_space_confinement", [1.0, 0.0]),
    ]
    details = []
    ok = True
    for kind, q0 in cases:
        cfg = _config(kind, LADDER[0], 1.0, "cross_sine", 0.5,
                      q0, [0.5, 0.0], 1.0, 0.002)
        rep = convergence_study(
            cfg, ErrorMetric.PATHWISE_SUP_L2_UNCONSTRAINED, LADDER, N_PATHS, 316
        )
        vals = np.asarray(rep.values)
        mono = bool(np.all(np.diff(vals) < 0))
        ok = ok and mono
        details.append(f"{kind}@q1={q0[0]:g} mono={mono}")
    _verdict(6, "pathwise-sup-monotone", ok, "; ".join(details))


def test_criterion_07_uniform_in_time():
    cfg = _config(
        "phase_space_confinement", 1e-3, 1.0, "cross_sine", 0.5,
        [0.0, 0.0], [0.0, 0.0], 20.0, 0.005,
    )
    rep = uniform_in_time_check(cfg, (5.0, 20.0), N_PATHS, 317)
    ok = rep.ratio_max_min < 2.0
    _verdict(
        7,
        "uniform-in-time-sup-error",
        ok,
        f"ratio T=20/T=5 = {rep.ratio_max_min:.3f}",
    )


def test_criterion_08_zero_mass():
    cfg = _config(
        "zero_mass", LADDER[0], 0.0, "cross_sine", 0.5,
        [1.0, 0.5], [0.0, 0.0], 1.0, 0.001,
    )
    rep_p = convergence_study(
        cfg, ErrorMetric.POINTWISE_L2_P1, LADDER, N_PATHS, 318
    )
    rep_tr = convergence_study(
        cfg, ErrorMetric.POINTWISE_L2_TRIPLE_VS_LIMIT, LADDER, N_PATHS, 318
    )
    tr = np.asarray(rep_tr.values)
    ok = (
        0.7 <= rep_p.fit.slope <= 1.3
        and tr[-1] < tr[0]
        and rep_tr.fit.slope > 0
    )
    _verdict(
        8,
        "zero-mass-limit",
        ok,
        f"p1 slope {rep_p.fit.slope:.3f}, triple slope {rep_tr.fit.slope:.3f}",
    )


def test_criterion_09_infinite_mass():
    cfg = _config(
        "infinite_mass", LADDER[0], 0.0, "cross_sine", 0.5,
        [1.0, 0.5], [0.3, 0.0], 1.0, 0.002,
    )
    rep_q = convergence_study(
        cfg, ErrorMetric.POINTWISE_L2_Q1_MINUS_Q10, LADDER, N_PATHS, 319
    )
    rep_p = convergence_study(
        cfg, ErrorMetric.POINTWISE_L2_P1_VS_LIMIT, LADDER, N_PATHS, 319
    )
    pv = np.asarray(rep_p.values)
    ok = 1.6 <= rep_q.fit.slope <= 2.4 and pv[-1] < pv[0] and rep_p.fit.slope > 0
    _verdict(
        9,
        "infinite-mass-limit",
        ok,
        f"q1 slope {rep_q.fit.slope:.3f}, p1-vs-limit slope {rep_p.fit.slope:.3f}",
    )


def test_criterion_10_infinite_friction():
    fd = _config(
        "infinite_friction_fd", LADDER[0], 0.0, "zero", 0.0,
        [1.0, 0.0], [0.0, 0.0], 1.0, 0.01,
    )
    rep_q = convergence_study(
        fd, ErrorMetric.POINTWISE_L2_Q1_MINUS_Q10, LADDER, N_PATHS, 320
    )

    var_cfg = fd.replace(
        mechanism=MechanismSpec("infinite_friction_fd", 1e-3),
        horizon_T=5.0,
        dt=0.05,
    )
    var, se = _final_p1_variance(var_cfg, N_PATHS, 321)
    var_ok = abs(var - 1.0) <= 3.0 * se

    vals = {}
    for kind in ("infinite_friction_fd", "infinite_friction_nofd"):
        cfg = fd.replace(mechanism=MechanismSpec(kind, 0.01))
        vals[kind] = estimate_metric(
            cfg, ErrorMetric.POINTWISE_L2_P1, N_PATHS, 322
        ).value
    nofd_ok = vals["infinite_friction_nofd"] < 0.02 * vals["infinite_friction_fd"]

    ok = 0.7 <= rep_q.fit.slope <= 1.3 and var_ok and nofd_ok
    _verdict(
        10,
        "infinite-friction-variants",
        ok,
        f"q1 slope {rep_q.fit.slope:.3f}, Var(P1)={var:.4f}+-{se:.4f}, "
        f"nofd/fd={vals['infinite_friction_nofd'] / vals['infinite_friction_fd']:.4f}",
    )


def _moments_within(emp, target, n_se=3.0):
    bad = []
    for i, lab in enumerate(target.labels):
        if abs(emp.mean[i] - target.mean[i]) > n_se * emp.mean_se[i]:
            bad.append(f"mean[{lab}]")
        for j in range(i, len(target.labels)):
            if abs(emp.cov[i, j] - target.cov[i, j]) > n_se * emp.cov_se[i, j]:
                bad.append(f"cov[{lab},{target.labels[j]}]")
    return bad


def test_criterion_11_steady_states():
    two_body = two_body_config(
        1.0, 1.0, 1.0, 1.0, 1.0, 1.0,
        mechanism=MechanismSpec("phase_space_confinement", 1e-3),
        horizon_T=200.0,
        dt=0.05,
    )
    ens, _ = simulate_ensemble(two_body, N_PATHS, 323, record_stride=40)
    emp = empirical_moments(ens, burn_in_fraction=0.5)
    target = limit_target(two_body)
    bad_a = _moments_within(emp.subset(target.labels), target)

    fd = _config(
        "infinite_friction_fd", 0.1, 1.0, "zero", 0.0,
        [1.0, -0.5], [0.2, 0.0], 200.0, 0.05,
    )
    ens_fd, _ = simulate_ensemble(fd, N_PATHS, 324, record_stride=40)
    emp_fd = empirical_moments(ens_fd, burn_in_fraction=0.5)
    target_fd = prelimit_stationary_gaussian(fd)
    bad_b = _moments_within(emp_fd.subset(target_fd.labels), target_fd)

    ok = not bad_a and not bad_b
    _verdict(
        11,
        "steady-states",
        ok,
        "all moments within 3 SE"
        if ok
        else f"two-body: {bad_a or 'ok'}; friction: {bad_b or 'ok'}",
    )


def test_criterion_12_byte_identical_rerun(tmp_path):
    config = {
        "d": 2,
        "k": 1,
        "gamma": 1.0,
        "beta": 1.0,
        "alpha": 1.0,
        "u_kind": "cross_sine",
        "u_amplitude": 0.5,
        "mechanism": "phase_space_confinement",
        "epsilons": [0.2, 0.1, 0.05],
        "q0": [0.0, 1.0],
        "p0": [0.0, 0.0],
        "horizon_T": 0.5,
        "dt": 0.005,
        "n_paths": N_PATHS,
        "metrics": ["pointwise_l2_q1"],
        "seed": 12,
        "format": "csv",
        "output_path": ".",
    }
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(config))
    blobs = []
    for name in ("first", "second"):
        out = tmp_path / name
        out.mkdir()
        code = cli.main(["converge", "--config", str(cfg_path), "--out", str(out)])
        assert code == 0
        blobs.append(
            (
                (out / "converge_pointwise_l2_q1.csv").read_bytes(),
                (out / "converge_summary.json").read_bytes(),
            )
        )
    ok = blobs[0] == blobs[1]
    _verdict(12, "deterministic-rerun", ok, "csv and summary byte-identical")
