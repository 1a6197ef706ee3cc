class DomainError(ValueError):
    """A thermodynamic argument left the admissible domain of the model."""


class RegimeError(ValueError):
    """Nondimensional parameters outside the range where the mapping is defined."""


class SolverError(RuntimeError):
    """Time integration failed.

    ``step`` carries the index of the failing step when known.
    """

    def __init__(self, message, step=None):
        super().__init__(message if step is None else f"step {step}: {message}")
        self.step = step


class ConfigError(ValueError):
    """Invalid configuration document."""


class StudyError(RuntimeError):
    """A case of a limit study failed; ``report`` holds the cases that finished."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
