"""Exception types shared across the package."""


class InvalidParameter(ValueError):
    """A parameter is outside its admissible range.

    ``field`` names the offending parameter when it maps onto a config key.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class DomainError(ValueError):
    """A law was evaluated outside the set where it is defined."""


class StepFailure(RuntimeError):
    """A nonlinear solve did not converge; callers are expected to cut dt."""

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class ConfigError(ValueError):
    """Malformed configuration file, anchored to a line when possible."""

    def __init__(self, message, line=None, field=None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line
        self.field = field
