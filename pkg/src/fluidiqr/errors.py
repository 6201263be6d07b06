"""Exception hierarchy shared across the package."""

from __future__ import annotations


class FluidIQRError(Exception):
    """Base class for every error raised by this package."""


class DataError(FluidIQRError, ValueError):
    """Input data violates the expected format.

    ``row`` is the 1-based data row (header excluded) and ``column`` the
    offending column name, when known.
    """

    def __init__(self, message, row=None, column=None, path=None):
        self.row = row
        self.column = column
        self.path = path
        where = []
        if path is not None:
            where.append(f"file {path}")
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class MissingColumn(DataError):
    pass


class NonHourlyGap(DataError):
    pass


class UnparsableValue(DataError):
    pass


class NegativeCount(DataError):
    pass


class TooFewPoints(FluidIQRError, ValueError):
    pass


class SeriesTooShort(FluidIQRError, ValueError):
    pass


class PeriodsNotAscending(FluidIQRError, ValueError):
    pass


class LengthMismatch(FluidIQRError, ValueError):
    pass


class EmptyInput(FluidIQRError, ValueError):
    pass
