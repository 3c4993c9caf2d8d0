"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
IntegrityError (and anything unexpected) -> 4.
"""


class FairtreeError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(FairtreeError):
    """Invalid configuration: bad flags, specs, thresholds, or parameters."""


class DataError(FairtreeError):
    """Invalid or inconsistent data: malformed files, mismatched fingerprints."""


class UndefinedMetricError(FairtreeError):
    """A requested metric is undefined on the given inputs (e.g. empty group)."""


class IntegrityError(FairtreeError):
    """An internal invariant was violated; indicates a bug, not user error."""
