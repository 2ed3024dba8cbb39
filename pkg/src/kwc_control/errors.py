"""Exception types shared by the solvers and the command line."""


class ConfigError(ValueError):
    """Invalid input data or configuration (CLI exit code 2)."""


class StepSizeError(ConfigError):
    """Time step too large for the guaranteed solvability bound."""


class SolverError(RuntimeError):
    """A numerical solve failed (CLI exit code 1).

    Attributes
    ----------
    step : int or None
        Time step at which the failure occurred.
    """

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message if step is None else f"step {step}: {message}")
        self.step = step


class SingularLimitError(ConfigError):
    """An operation that needs ``eps > 0`` was called with ``eps = 0``."""
