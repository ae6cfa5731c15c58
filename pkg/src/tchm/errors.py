"""Exception types raised by the simulator."""


class TCHMError(Exception):
    """Base class for all simulator errors."""


class ConfigError(TCHMError, ValueError):
    """A configuration file or value could not be parsed.

    ``key`` and ``line`` locate the problem when known.
    """

    def __init__(self, message, key=None, line=None):
        where = []
        if key is not None:
            where.append(f"key {key!r}")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.key = key
        self.line = line


class NumericalError(TCHMError, RuntimeError):
    """A numerical routine failed; the CLI maps this to exit code 2."""


class EigensolveError(NumericalError):
    def __init__(self, message, seed=None):
        if seed is not None:
            message = f"{message} [realization seed {seed}]"
        super().__init__(message)
        self.seed = seed


class SteadyStateError(NumericalError):
    pass


class IntegrationError(NumericalError):
    pass


class DimensionGuardError(TCHMError, ValueError):
    """The truncated Hilbert space is larger than the configured guard."""

    def __init__(self, dimension, limit):
        super().__init__(
            f"truncated Hilbert space dimension {dimension} exceeds the guard {limit}"
        )
        self.dimension = dimension
        self.limit = limit
