"""Exception hierarchy.

The CLI maps these onto exit codes: ConfigurationError -> 3,
StabilityError -> 2, self-check failures -> 1.
"""


class SoftLangevinError(Exception):
    """Base class for all package errors."""


class ConfigurationError(SoftLangevinError):
    """Invalid or inconsistent configuration input."""


class StabilityError(SoftLangevinError):
    """Numerical blow-up (NaN/Inf or >0.1% of paths diverging)."""

    def __init__(self, message, n_bad=0, n_paths=0, step_index=None):
        super().__init__(message)
        self.n_bad = n_bad
        self.n_paths = n_paths
        self.step_index = step_index


class CapabilityError(SoftLangevinError):
    """Requested combination is outside what the implementation supports."""


class RegimeError(SoftLangevinError):
    """Parameter regime violates a closed-form precondition."""


class InsufficientDataError(SoftLangevinError):
    """Not enough samples/time points for a statistically meaningful answer."""


class DegenerateConstraintError(SoftLangevinError):
    """Constraint map with (numerically) rank-deficient Y Y^T."""
