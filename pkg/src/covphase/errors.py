"""Exception types raised across the package."""


class CovPhaseError(Exception):
    """Base class for all package errors."""


class NonHermitianInput(CovPhaseError, ValueError):
    pass


class NonUnitVector(CovPhaseError, ValueError):
    pass


class NonUnitNorm(CovPhaseError, ValueError):
    pass


class DimensionTooSmall(CovPhaseError, ValueError):
    pass


class MissingLabel(CovPhaseError, KeyError):
    pass


class ValidationFailed(CovPhaseError, ValueError):
    pass


class CutoffMismatch(CovPhaseError, ValueError):
    pass


class MalformedMoment(CovPhaseError, ValueError):
    pass


class TailTooLarge(CovPhaseError, ValueError):
    pass


class CutoffOverBudget(CovPhaseError, ValueError):
    pass


class ConfigError(CovPhaseError, ValueError):
    """Raised by the CLI when a run configuration cannot be used."""


class IoError(CovPhaseError, OSError):
    """Raised when an output artifact cannot be written."""
