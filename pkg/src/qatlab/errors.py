"""Exception types raised across the package."""


class QatLabError(Exception):
    """Base class for all package errors."""


class ShapeMismatchError(QatLabError, ValueError):
    pass


class EmptyTensorError(QatLabError, ValueError):
    pass


class OutOfRangeLevelError(QatLabError, ValueError):
    pass


class SingularDenominatorError(QatLabError, ArithmeticError):
    """Surrogate denominator came within 1e-12 of zero."""


class UnsupportedSpecError(QatLabError, ValueError):
    pass


class DomainError(QatLabError, ValueError):
    pass


class InvalidRangeError(QatLabError, ValueError):
    pass


class StaleCacheError(QatLabError, RuntimeError):
    """Forward cache no longer matches the model it was built from."""
