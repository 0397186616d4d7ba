"""Exception types raised across the package."""


class RSFError(Exception):
    """Base class for all errors raised by :mod:`rsf`."""


class NotHermitian(RSFError, ValueError):
    pass


class ConvergenceFailure(RSFError, RuntimeError):
    pass


class InvalidState(RSFError, ValueError):
    pass


class DivergentOccupation(RSFError, ValueError):
    pass


class DimensionMismatch(RSFError, ValueError):
    pass


class StepSizeUnderflow(RSFError, RuntimeError):
    pass


class InvariantViolation(RSFError, RuntimeError):
    """A trajectory left the physical state space.

    ``time`` holds the grid time at which the violation was detected.
    """

    def __init__(self, message, time=None):
        super().__init__(message if time is None else f"{message} (t={time:.6g})")
        self.time = time


class NotClassicalLimit(RSFError, ValueError):
    pass


class DimensionLimitExceeded(RSFError, ValueError):
    pass


class TruncationUnreliable(RSFError, RuntimeError):
    pass


class DiagonalityViolation(RSFError, ValueError):
    pass


class NotCompletelyPositive(RSFError, ValueError):
    pass


class LogBranchAmbiguity(UserWarning):
    """Issued when a unitary has an eigenvalue at -1 and the principal log branch is used."""
