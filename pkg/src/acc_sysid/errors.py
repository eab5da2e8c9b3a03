"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class AccSysidError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(AccSysidError, ValueError):
    pass


class InvalidConfigError(AccSysidError, ValueError):
    pass


class DegenerateRecoveryError(AccSysidError, ArithmeticError):
    """Least-squares coefficients do not determine (alpha, beta, tau), e.g. x3 == 0."""


class SingularFrequencyError(AccSysidError, ArithmeticError):
    pass


class RankDeficientError(AccSysidError, ArithmeticError):
    pass


class NumericalBreakdownError(AccSysidError, ArithmeticError):
    """A covariance could not be factorized, even after jitter escalation.

    ``matrix`` holds the offending matrix and ``step`` the trajectory index
    when raised from inside a filter run.
    """

    def __init__(self, message, matrix=None, step=None):
        super().__init__(message)
        self.matrix = matrix
        self.step = step

    def __str__(self):
        base = super().__str__()
        return base if self.step is None else f"{base} (step {self.step})"


class ProfileError(AccSysidError, ValueError):
    pass


class DivergenceError(AccSysidError, ArithmeticError):
    pass


class SchemaError(AccSysidError, ValueError):
    pass


class InsufficientDataError(AccSysidError, ValueError):
    pass


class MalformedTimeError(AccSysidError, ValueError):
    pass


class DataGapError(AccSysidError, ValueError):
    def __init__(self, message, intervals=()):
        super().__init__(message)
        self.intervals = list(intervals)
