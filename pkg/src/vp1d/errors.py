"""Exception types shared across the solver modules."""


class SolverError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameter(SolverError, ValueError):
    """An argument violates a documented precondition."""


class InvalidProfile(SolverError, ValueError):
    """Profile or snapshot data is non-finite or malformed."""


class PositivityViolation(SolverError, ValueError):
    """Initial data F - g0 dips below zero somewhere on the grid."""


class OutOfRange(SolverError, ValueError):
    """A query point lies outside the stored history span."""


class IntegrationFailure(SolverError, RuntimeError):
    """Characteristic integration produced a non-finite state."""


class NonConvergence(SolverError, RuntimeError):
    """The fixed-point iteration hit its cap before reaching tolerance.

    Carries the iteration trace and the last iterate so callers can
    inspect or export partial results.
    """

    def __init__(self, message, trace=None, history=None):
        super().__init__(message)
        self.trace = trace
        self.history = history


class ContinuationRefused(SolverError, RuntimeError):
    """The monitored norm exceeds its cap, so the solution is not extended."""


class InvalidComparison(SolverError, ValueError):
    """Two runs cannot be compared (mismatched grids or backgrounds)."""


class InsufficientData(SolverError, ValueError):
    """Not enough usable samples for a fit or an order estimate."""
