"""Exception types shared across the package."""


class FairshiftError(Exception):
    """Base class for all domain errors raised by this package."""


class ValidationError(FairshiftError, ValueError):
    """Malformed or inconsistent inputs (bad probabilities, alphabet mismatch, ...)."""


class SupportViolationError(ValidationError):
    """Target places probability mass where the source has none."""


class UndefinedRateError(ValidationError):
    """A conditional rate is undefined because its conditioning event has zero mass."""


class InfeasibleError(FairshiftError, RuntimeError):
    """An oracle search could not produce any feasible candidate."""
