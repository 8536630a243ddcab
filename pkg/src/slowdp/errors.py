"""Semantic exception hierarchy shared across the package."""


class SlowDPError(Exception):
    """Base class for all package errors."""


class DomainError(SlowDPError, ValueError):
    """An argument lies outside a function's mathematical domain."""


class ParameterError(SlowDPError, ValueError):
    """A spec (noise, transform, mechanism, config) has invalid parameters."""


class SeriesDivergenceError(SlowDPError, ArithmeticError):
    """A series is evaluated outside its convergence region."""


class SeriesTruncationError(SlowDPError, ArithmeticError):
    """A series failed to converge within the allotted number of terms."""


class UnsupportedOrderError(SlowDPError, ValueError):
    """A polynomial order exceeds the supported cap."""


class MomentError(SlowDPError, ArithmeticError):
    """A requested moment of a distribution does not exist."""


class FamilyError(SlowDPError, TypeError):
    """An operation was applied to a noise family it is not defined for."""


class CalibrationError(SlowDPError, ArithmeticError):
    """Root-finding for a mechanism parameter failed to bracket a solution."""


class DataError(SlowDPError, ValueError):
    """A data file could not be parsed into a valid dataset."""
