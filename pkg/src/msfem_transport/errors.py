"""Exception types raised across the package."""


class ConfigError(ValueError):
    """Invalid configuration (unknown media, bad sizes, malformed config file)."""


class InvalidMediaError(ValueError):
    """The scattering coefficient is non-positive somewhere."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class AssemblyError(RuntimeError):
    """Failure while building basis functions or spatial matrices."""


class SolverError(RuntimeError):
    """A linear solve failed or did not reach the requested residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class MetricError(ValueError):
    """Bad input to an error norm or rate fit."""
