"""Soft-constrained underdamped Langevin dynamics.

A library and CLI for studying how soft (penalty-style) constraints on a
degenerate diffusion converge to their hard-constraint limits: five softening
mechanisms with a shared coefficient table, the corresponding limit dynamics,
closed-form Gaussian solutions for linear systems, shared-noise coupled
integration, Monte Carlo rate estimation, and steady-state audits.
"""

from .analytic import (
    BlockParams,
    BoundCheckReport,
    GaussianLaw,
    block_matrix_exp,
    block_params_from,
    exact_linear_gaussian,
    integrated_exp,
    matrix_exp_bound_check,
    ou_spatial_stats,
    psd_sqrt_factor,
    stochastic_convolution_cov,
)
from .dynamics import (
    AffineReduction,
    LimitSystem,
    SdeSystem,
    affine_reduce,
    build_limit,
    build_prelimit,
    prelimit_component_labels,
    prelimit_linear_parts,
)
from .errors import (
    CapabilityError,
    ConfigurationError,
    DegenerateConstraintError,
    InsufficientDataError,
    RegimeError,
    SoftLangevinError,
    StabilityError,
)
from .estimators import (
    ConvergenceReport,
    ErrorMetric,
    MetricEstimate,
    RateFit,
    UniformInTimeReport,
    convergence_study,
    estimate_metric,
    fit_rate,
    floor_detect,
    uniform_in_time_check,
)
from .integrate import (
    NoiseStream,
    StepperKind,
    resolve_workers,
    run_collected,
    simulate_coupled_pair,
    simulate_ensemble,
)
from .model import (
    MECHANISMS,
    U_KINDS,
    CoeffSet,
    MechanismSpec,
    PathEnsemble,
    PotentialSpec,
    SystemConfig,
    ValidationReport,
    eval_potential_gradient,
    eval_potential_value,
    mechanism_coefficients,
    potential_quadratic_hessian,
    validate_potential,
)
from .steady import (
    EmpiricalMoments,
    GaussianTarget,
    TwoBodyReport,
    empirical_moments,
    frozen_position_sensitivity,
    gaussian_w2,
    limit_target,
    prelimit_stationary_gaussian,
    two_body_config,
    two_body_report,
    w2_uncertainty,
)

__version__ = "1.0.0"

__all__ = [
    "__version__",
    # model
    "MECHANISMS",
    "U_KINDS",
    "CoeffSet",
    "MechanismSpec",
    "PotentialSpec",
    "SystemConfig",
    "PathEnsemble",
    "ValidationReport",
    "mechanism_coefficients",
    "eval_potential_value",
    "eval_potential_gradient",
    "potential_quadratic_hessian",
    "validate_potential",
    # dynamics
    "SdeSystem",
    "LimitSystem",
    "AffineReduction",
    "build_prelimit",
    "build_limit",
    "prelimit_linear_parts",
    "prelimit_component_labels",
    "affine_reduce",
    # analytic
    "BlockParams",
    "GaussianLaw",
    "BoundCheckReport",
    "block_params_from",
    "block_matrix_exp",
    "integrated_exp",
    "stochastic_convolution_cov",
    "exact_linear_gaussian",
    "psd_sqrt_factor",
    "ou_spatial_stats",
    "matrix_exp_bound_check",
    # integrate
    "StepperKind",
    "NoiseStream",
    "run_collected",
    "simulate_ensemble",
    "simulate_coupled_pair",
    "resolve_workers",
    # estimators
    "ErrorMetric",
    "MetricEstimate",
    "RateFit",
    "ConvergenceReport",
    "UniformInTimeReport",
    "estimate_metric",
    "convergence_study",
    "fit_rate",
    "floor_detect",
    "uniform_in_time_check",
    # steady
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
    # errors
    "SoftLangevinError",
    "ConfigurationError",
    "StabilityError",
    "CapabilityError",
    "RegimeError",
    "InsufficientDataError",
    "DegenerateConstraintError",
]
