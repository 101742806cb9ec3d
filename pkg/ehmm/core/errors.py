"""Error hierarchy for ehmm.

Library code raises these; only the CLI turns them into messages and exit
codes (1 usage, 2 numeric/domain, 3 I/O).
"""


class EhmmError(Exception):
    """Base class for all ehmm errors."""

    exit_code = 1


class UsageError(EhmmError):
    """Bad arguments: length mismatch, out-of-range index, malformed input."""

    exit_code = 1


class NumericError(EhmmError):
    """A model callback or kernel produced NaN."""

    exit_code = 2


class DegenerateSeriesError(NumericError):
    """A statistic is undefined for the series (e.g. zero variance)."""


class DomainError(EhmmError):
    """A density support or invariance requirement is violated."""

    exit_code = 2


class ImpossibleUpdateError(DomainError):
    """The embedded HMM has no finite-weight index path."""


class StorageError(EhmmError):
    """A file could not be read or written."""

    exit_code = 3


class GridTooSmallWarning(UserWarning):
    """Grid oracle posterior mass at the grid boundary exceeds tolerance."""
