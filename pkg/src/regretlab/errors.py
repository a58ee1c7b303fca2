"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Matrix or vector dimensions are inconsistent with the declared system."""


class AssumptionViolationError(ValueError):
    """A structural precondition fails (non-PD cost matrix, offset bound, ...)."""


class SimulationOverflowError(RuntimeError):
    """State norm exceeded the overflow guard during a rollout."""

    def __init__(self, t, norm, limit):
        self.t = int(t)
        self.norm = float(norm)
        self.limit = float(limit)
        super().__init__(
            f"state norm {norm:.3e} exceeded {limit:.1e} at step t={t}"
        )


class ConvergenceError(RuntimeError):
    """An iterative solver did not converge within its iteration cap."""

    def __init__(self, message, residual=None, iterations=None):
        self.residual = residual
        self.iterations = iterations
        super().__init__(message)


class ConditioningError(RuntimeError):
    """A linear solve was refused because the matrix is numerically singular."""


class ConfigError(ValueError):
    """Invalid experiment configuration (schema or dimension mismatch)."""

    def __init__(self, message, field=None):
        self.field = field
        super().__init__(message)
