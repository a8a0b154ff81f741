"""Exception types shared across the package."""


class DeltaGridError(Exception):
    """Base class for all package errors."""


class ResolutionMismatchError(DeltaGridError):
    """Operands live at different dyadic scales."""


class InvalidScaleError(DeltaGridError):
    """Scale parameter is not of the form 2**-m with integer m >= 1."""


class DomainError(DeltaGridError):
    """Endpoints are not dyadic, are misordered, or do not contain the data."""


class HypothesisViolationError(DeltaGridError):
    """A quantitative hypothesis of a statement fails on the given input.

    The message names the failed inequality with both sides evaluated.
    """


class UnsupportedConfigurationError(DeltaGridError):
    """Input is valid but outside the range this implementation handles."""


class DegenerateConfigurationError(DeltaGridError):
    """Geometric input collapses (duplicate tips, collinear triples, ...)."""
