"""Exception types raised across the package."""


class MajorMinorError(Exception):
    """Base class for all package errors."""


class ParseError(MajorMinorError, ValueError):
    pass


class ValidationError(MajorMinorError, ValueError):
    pass


class FeatureOutOfRange(MajorMinorError, ValueError):
    pass


class CapacityError(MajorMinorError, RuntimeError):
    pass


class NonFiniteValue(MajorMinorError, ValueError):
    pass


class NumericalFailure(MajorMinorError, RuntimeError):
    pass


class DimensionMismatch(MajorMinorError, ValueError):
    pass


class ShapeMismatch(MajorMinorError, ValueError):
    pass


class MassMismatch(MajorMinorError, ValueError):
    pass


class InfeasibleFlow(MajorMinorError, ValueError):
    pass


class NotConverged(MajorMinorError, RuntimeError):
    """Raised only by callers that want an exception; solvers return reports."""

    def __init__(self, message, report=None, lam=None):
        super().__init__(message)
        self.report = report
        self.lam = lam
