"""Exception types shared across the package.

The CLI maps these onto process exit codes; see ffax.cli.
"""


class FfaxError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(FfaxError, ValueError):
    """A value, instance, or model violates its declared domain/invariants."""


class ParseError(FfaxError, ValueError):
    """An input document is malformed. ``location`` points at the offender."""

    def __init__(self, message: str, location: str | None = None):
        self.location = location
        super().__init__(message if location is None else f"{location}: {message}")


class ContractError(FfaxError, ValueError):
    """A documented precondition of an operation was violated by the caller."""


class CapabilityError(FfaxError, TypeError):
    """The requested operation does not support this model kind."""


class CapacityError(FfaxError, RuntimeError):
    """An exhaustive procedure would exceed its size cap."""

    def __init__(self, message: str, size: int | None = None):
        self.size = size
        super().__init__(message)


class UndefinedAttributionError(FfaxError, ValueError):
    """Attribution is undefined because no explanations were collected."""


class DegenerateExplanationError(FfaxError, ValueError):
    """A weighted attribution was requested over an empty explanation set member."""


class UndefinedMetricError(FfaxError, ValueError):
    """A rank metric is undefined for the given inputs (e.g. constant vector)."""


class DataMismatchError(FfaxError, ValueError):
    """Two documents that must describe the same feature space do not."""
