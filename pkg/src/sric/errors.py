"""Exception hierarchy.

Every error raised on purpose by this package derives from SricError, so
callers can catch one type at the boundary. Subclasses are semantic: they
say what went wrong in the model, not which numpy call failed.
"""


class SricError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(SricError):
    """Vector or matrix dimensions do not agree."""


class DomainError(SricError, ValueError):
    """A numeric argument lies outside the valid domain."""


class NotSymmetricError(SricError):
    """Covariance input is not symmetric within tolerance."""


class NotPositiveDefiniteError(SricError):
    """Covariance input is not strictly positive definite."""


class DegenerateEstimateError(SricError):
    """Sample mean estimate is zero; the Sharpe-maximizing ray is undefined."""


class DegeneratePopulationError(SricError):
    """Population mean is zero; only the null-regime quantities are defined."""


class BasisRankError(SricError):
    """Subspace basis columns are linearly dependent."""


class EmptyFamilyError(SricError):
    """Model selection was asked to choose from an empty candidate list."""


class ParseError(SricError):
    """Input file could not be parsed; message carries file and line."""


class EmptyDataError(SricError):
    """Parsed file contains no usable rows."""


class AlignmentError(SricError):
    """Date alignment between two series produced an empty intersection."""


class DegenerateWindowError(SricError):
    """Data window is too short or its covariance is unusable."""


class ConfigError(SricError):
    """Experiment or backtest configuration failed validation."""
