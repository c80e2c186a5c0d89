"""Exception types shared across the toolkit."""


class ZadError(Exception):
    """Base class for all toolkit errors."""


class FormatError(ZadError):
    """A container file does not start with the expected magic or layout."""


class TruncationError(ZadError):
    """A container file ended before its declared payload."""


class DataError(ZadError):
    """File contents violate a data invariant (NaN, zero-norm row, ...)."""


class SchemaError(ZadError):
    """A JSON document violates the expected schema.

    ``path`` points at the offending element, e.g.
    ``database.video_3.annotations[1].segment``.
    """

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class ShapeError(ZadError):
    """Operands have incompatible dimensions."""


class SamplingError(ZadError):
    """A sampling request cannot be satisfied (e.g. too few frames)."""


class ConfigError(ZadError):
    """A configuration value is invalid or inconsistent."""
