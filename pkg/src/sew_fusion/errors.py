"""
Spline Error Weighting Exceptions.

Every error raised by the package derives from SewError. Input problems also
derive from ValueError so callers that only catch ValueError keep working.
"""


class SewError(Exception):
    """Base class for all package errors."""


class InvalidInputError(SewError, ValueError):
    """Malformed or out-of-range input (too few samples, non-finite values, ...)."""


class OutOfDomainError(SewError, ValueError):
    """A spline was evaluated outside its valid interval."""


class FitError(SewError):
    """A least-squares spline fit could not be solved."""


class DegenerateInputError(SewError, ValueError):
    """The input carries no information for the requested quantity."""


class DegenerateWeightError(SewError, ValueError):
    """The predicted residual variance is zero, so no weight can be formed."""


class BracketError(SewError, ValueError):
    """A root finder was given an interval without a sign change."""


class CheiralityError(SewError):
    """A point projected to or behind the camera plane."""


class BuildError(SewError):
    """A fusion problem could not be assembled from its measurements."""


class SolverAbortError(SewError):
    """The solver could not start or continue (non-finite cost)."""


class ConfigError(SewError, ValueError):
    """A configuration document is invalid."""


class CsvFormatError(InvalidInputError):
    """A CSV input file is malformed.

    Attributes:
        line: 1-based line number of the offending row (0 when unknown)
    """

    def __init__(self, message: str, line: int = 0) -> None:
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


class SaturationWarning(UserWarning):
    """Knot-spacing selection hit the minimum spacing before reaching the quality."""
