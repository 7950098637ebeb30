"""Exception types raised across the package."""


class LracError(Exception):
    """Base class for all package errors."""


class ZeroSecondMoment(LracError, ValueError):
    pass


class RadiusTooLarge(LracError, ValueError):
    pass


class DimensionMismatch(LracError, ValueError):
    pass


class SingularMode(LracError, ArithmeticError):
    pass


class IncompatibleRefinement(LracError, ValueError):
    pass


class UnstableStep(LracError, ValueError):
    pass


class NonFinite(LracError, FloatingPointError):
    pass


class NonPositiveError(LracError, ValueError):
    pass


class ReplicaFailure(LracError, RuntimeError):
    pass


class InsufficientTransitions(LracError, RuntimeError):
    pass


class ConfigInvalid(LracError, ValueError):
    pass


class StudyFailed(LracError, RuntimeError):
    pass
