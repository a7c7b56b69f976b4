"""Exception types raised across the package."""


class ExpKError(Exception):
    """Base class for all package errors."""


class SingularMatrixError(ExpKError, ArithmeticError):
    pass


class MatrixOverflowError(ExpKError, OverflowError):
    pass


class DimensionMismatchError(ExpKError, ValueError):
    pass


class ZeroVectorError(ExpKError, ValueError):
    """Krylov construction was asked to start from the zero vector."""


class StageCountError(ExpKError, ValueError):
    pass


class NormalizationError(ExpKError, ValueError):
    """A B-series operation received a series with the wrong empty-tree term."""


class UnknownSchemeError(ExpKError, KeyError):
    pass


class NoConvergenceError(ExpKError, RuntimeError):
    """Adaptive Krylov projection hit its dimension cap before meeting tol."""


class InstabilityError(ExpKError, FloatingPointError):
    """The time-stepping state became non-finite (or unphysical)."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class CacheCorruptionError(ExpKError, OSError):
    pass
