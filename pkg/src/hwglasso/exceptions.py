class HWGlassoError(Exception):
    """Base class for package errors."""


class DataError(HWGlassoError, ValueError):
    """Input data is malformed (shape, non-finite values, constant columns)."""


class NotPositiveDefiniteError(HWGlassoError, ValueError):
    """A matrix required to be positive definite failed its Cholesky factorization."""


class ConvergenceError(HWGlassoError, RuntimeError):
    """No fit on a tuning grid converged, or too many replicate fits failed."""
