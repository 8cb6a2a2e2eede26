"""Exception types shared by the simulator and the rate engine."""


class ConfigurationError(ValueError):
    """Invalid or inconsistent user-supplied configuration."""


class SingularityError(ArithmeticError):
    """A zero-forcing matrix is singular or too badly conditioned to invert."""

    def __init__(self, message: str, condition: float | None = None):
        super().__init__(message)
        self.condition = condition


class InternalError(RuntimeError):
    """A numerical invariant that should always hold was violated."""
