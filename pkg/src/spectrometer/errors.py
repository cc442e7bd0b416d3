"""Exception types raised across the package."""


class SpectroMeterError(Exception):
    """Base class for all package errors."""


class FormatError(SpectroMeterError, ValueError):
    """Malformed or unsupported input file."""


class DomainError(SpectroMeterError, ValueError):
    """Input domain violates an invariant (bad index, weight, degree...)."""


class ConvergenceError(SpectroMeterError, RuntimeError):
    """Iterative eigensolver failed to reach the requested residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class RankDeficiencyError(SpectroMeterError, RuntimeError):
    """Retained gradient rows do not span the non-constant modes."""
