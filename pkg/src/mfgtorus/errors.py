"""Exception types shared across the package."""


class MFGError(Exception):
    """Base class for all package errors."""


class NonPositiveDensity(MFGError):
    """The density field touched zero or went negative where positivity is required."""


class BadExponent(MFGError):
    """A moment exponent r <= alpha was requested; the inverse-moment machinery needs r > alpha."""


class NotASolution(MFGError):
    """An identity that only holds on solutions was evaluated at a non-solution state."""


class DegenerateState(MFGError):
    """A linearized system was probed at a state with non-positive density."""


class NotPositive(MFGError):
    """A manufactured density is not strictly positive."""


class SolverFailure(MFGError):
    """Base class for Newton-level failures; continuation reacts by shrinking its step."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class LinearSolveFailure(SolverFailure):
    """The Newton system was singular or too ill-conditioned to solve."""


class NoDescent(SolverFailure):
    """Damping underflowed without finding a residual-decreasing, positivity-preserving step."""


class MaxItersExceeded(SolverFailure):
    """Newton hit the iteration cap before reaching the residual tolerance."""


class ContinuationStalled(MFGError):
    """The continuation step underflowed; carries the partial trace for post-mortem."""

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace


class ConfigError(MFGError):
    """A run configuration failed schema validation."""
