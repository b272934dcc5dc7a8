"""Exception hierarchy shared by all vqst modules."""


class VqstError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(VqstError, ValueError):
    """Shapes, widths or lengths that should agree do not."""


class ParameterError(VqstError, ValueError):
    """Bad parameter vector, index or gate argument."""


class CapacityError(VqstError, MemoryError):
    """Requested object exceeds the dense-simulation memory guard."""


class UsageError(VqstError, ValueError):
    """An operation was called on input it does not support."""


class ConsistencyError(VqstError, RuntimeError):
    """An internal invariant was violated; indicates an upstream bug."""


class DomainError(VqstError, ValueError):
    """Numeric argument outside the mathematical domain of a function."""


class ConvergenceError(VqstError, RuntimeError):
    """Iterative solver failed to converge.

    Attributes:
        residual: best residual norm reached before giving up.
    """

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class ConfigError(VqstError, ValueError):
    """Invalid run configuration. ``path`` names the offending field."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
