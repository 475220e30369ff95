"""Exception types shared across the package."""


class DpsynthError(Exception):
    """Base class for all package-specific errors."""


class InvalidInputError(DpsynthError, ValueError):
    """Numeric input violates a kernel precondition (non-finite, bad range)."""


class EmptyBatchError(DpsynthError, ValueError):
    """An aggregation or generation step received an empty batch."""


class ConfigError(DpsynthError, ValueError):
    """Pipeline configuration is inconsistent or out of range (CLI exit 2)."""


class DataError(DpsynthError, ValueError):
    """Input data is missing, malformed, or out of vocabulary (CLI exit 3)."""
