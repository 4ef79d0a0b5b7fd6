"""Exception types raised across the package."""


class ConditionViolation(ValueError):
    """A potential or derived quantity violates an admissibility condition."""


class ConvergenceError(RuntimeError):
    """A refinement loop (node doubling, adaptive quadrature) did not settle."""


class PrecisionError(RuntimeError):
    """Loss of orthogonality or overflow that precision escalation could not repair."""


class IllConditioned(RuntimeError):
    """A matrix that must be inverted is numerically singular."""

    def __init__(self, message, cond=None):
        super().__init__(message)
        self.cond = cond


class FormatError(ValueError):
    """A serialized file does not match the expected layout or version."""
