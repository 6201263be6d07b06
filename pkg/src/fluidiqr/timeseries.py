"""Hourly series containers, CSV ingestion and the quantile primitives.

The canonical wire format is a UTF-8 CSV with the header
``timestamp,sessions,transactions,revenue`` and hourly ISO-8601 UTC
timestamps (``2017-05-01T00:00:00Z``).  Two optional columns are understood
as well: ``conversion`` (an explicit conversion rate that overrides the
transactions/sessions ratio) and ``label`` (ground-truth outlier flags
written by the synthetic generator).
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import (
    EmptyInput,
    LengthMismatch,
    MissingColumn,
    NegativeCount,
    NonHourlyGap,
    TooFewPoints,
    UnparsableValue,
)

logger = logging.getLogger(__name__)

HOUR = timedelta(hours=1)
TIMESTAMP_FORMAT = "%Y-%m-%dT%H:00:00Z"

DEFAULT_SCHEMA = {
    "timestamp": "timestamp",
    "sessions": "sessions",
    "transactions": "transactions",
    "revenue": "revenue",
    "conversion": "conversion",
    "label": "label",
}


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def to_utc_hour(ts: datetime) -> datetime:
    """Return ``ts`` as an aware UTC datetime truncated to the hour."""
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    else:
        ts = ts.astimezone(timezone.utc)
    return ts.replace(minute=0, second=0, microsecond=0)


def format_timestamp(ts: datetime) -> str:
    return ts.strftime(TIMESTAMP_FORMAT)


def parse_timestamp(text: str) -> datetime:
    """Parse an ISO-8601 hour stamp; naive stamps are taken as UTC."""
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    ts = ts.astimezone(timezone.utc)
    if ts.minute or ts.second or ts.microsecond:
        raise ValueError(f"timestamp {text!r} is not on the hour")
    return ts


@dataclass(frozen=True, eq=False)
class HourlySeries:
    """Gap-free hourly observations starting at ``start_time``."""

    start_time: datetime
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "start_time", to_utc_hour(self.start_time))
        values = _frozen(self.values)
        if values.ndim != 1 or values.size == 0:
            raise EmptyInput("an hourly series needs at least one value")
        if not np.all(np.isfinite(values)):
            raise ValueError("hourly series values must be finite")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size

    def timestamps(self) -> list[datetime]:
        return [self.start_time + i * HOUR for i in range(len(self))]

    def with_values(self, values) -> "HourlySeries":
        return HourlySeries(self.start_time, values)


@dataclass(frozen=True, eq=False)
class EcomSeries:
    """Aligned hourly sessions, transactions, revenue and conversion rate.

    ``revenue`` is ``None`` when the source carried no revenue column.
    ``warnings`` collects data-quality notes recorded during construction.
    """

    start_time: datetime
    sessions: np.ndarray
    transactions: np.ndarray
    revenue: Optional[np.ndarray] = None
    conversion: Optional[np.ndarray] = None
    warnings: tuple = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "start_time", to_utc_hour(self.start_time))
        sessions = _frozen(self.sessions)
        transactions = _frozen(self.transactions)
        n = sessions.size
        if n == 0:
            raise EmptyInput("an e-commerce series needs at least one hour")
        if transactions.size != n:
            raise LengthMismatch("sessions and transactions differ in length")
        if np.any(sessions < 0) or np.any(transactions < 0):
            raise NegativeCount("sessions and transactions must be non-negative")
        revenue = None
        if self.revenue is not None:
            revenue = _frozen(self.revenue)
            if revenue.size != n:
                raise LengthMismatch("revenue length differs from sessions")
        notes = list(self.warnings)
        if self.conversion is None:
            conversion = np.array(
                [conversion_rate(t, s) for t, s in zip(transactions, sessions)]
            )
            orphan = np.flatnonzero((sessions == 0) & (transactions > 0))
            for i in orphan:
                notes.append(f"hour {i}: {transactions[i]:g} transactions with zero sessions")
        else:
            conversion = np.asarray(self.conversion, dtype=float)
            if conversion.size != n:
                raise LengthMismatch("conversion length differs from sessions")
        if np.any(conversion < 0) or not np.all(np.isfinite(conversion)):
            raise ValueError("conversion rates must be finite and non-negative")
        for i in np.flatnonzero(conversion > 1):
            notes.append(f"hour {i}: conversion rate {conversion[i]:.6g} exceeds 1")
        for note in notes[len(self.warnings):]:
            logger.warning(note)
        object.__setattr__(self, "sessions", sessions)
        object.__setattr__(self, "transactions", transactions)
        object.__setattr__(self, "revenue", revenue)
        object.__setattr__(self, "conversion", _frozen(conversion))
        object.__setattr__(self, "warnings", tuple(notes))

    def __len__(self) -> int:
        return self.sessions.size

    @property
    def base(self) -> HourlySeries:
        return HourlySeries(self.start_time, self.conversion)

    def sessions_series(self) -> HourlySeries:
        return HourlySeries(self.start_time, self.sessions)


@dataclass(frozen=True)
class Quartiles:
    q1: float
    q3: float

    @property
    def iqr(self) -> float:
        return self.q3 - self.q1


def conversion_rate(transactions, sessions) -> float:
    """Transactions per session; hours without sessions convert at 0."""
    if sessions > 0:
        return transactions / sessions
    return 0.0


def asinh_transform(x):
    """Inverse hyperbolic sine, ``log(x + sqrt(x**2 + 1))``.

    Works on scalars and arrays.  ``np.arcsinh`` already evaluates the
    odd-symmetric, overflow-safe form, so large ``|x|`` needs no guard here.
    """
    out = np.arcsinh(np.asarray(x, dtype=float))
    return float(out) if out.ndim == 0 else out


def quartiles(values: Sequence[float]) -> Quartiles:
    """First and third quartile by linear interpolation of order statistics.

    The p-quantile sits at 1-based position ``1 + (n - 1) p`` of the sorted
    sample.
    """
    arr = np.asarray(values, dtype=float)
    if arr.size < 2:
        raise TooFewPoints(f"quartiles need at least 2 values, got {arr.size}")
    q1, q3 = np.quantile(arr, [0.25, 0.75], method="linear")
    return Quartiles(float(q1), float(q3))


# --------------------------------------------------------------------- CSV I/O


def _parse_count(text, row, column, path):
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise UnparsableValue(f"cannot parse {text!r} as a count", row, column, path) from None
    if not math.isfinite(value) or value != int(value):
        raise UnparsableValue(f"{text!r} is not a whole number", row, column, path)
    if value < 0:
        raise NegativeCount(f"negative count {text!r}", row, column, path)
    return int(value)


def _parse_amount(text, row, column, path, allow_negative=False):
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise UnparsableValue(f"cannot parse {text!r} as a number", row, column, path) from None
    if not math.isfinite(value):
        raise UnparsableValue(f"{text!r} is not finite", row, column, path)
    if value < 0 and not allow_negative:
        raise NegativeCount(f"negative value {text!r}", row, column, path)
    return value


def _read_rows(path, schema):
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        if not header:
            raise MissingColumn("file has no header row", column=schema["timestamp"], path=path)
        rows = list(reader)
    return path, header, rows


def _parse_times(rows, column, path):
    start = None
    prev = None
    for row_no, row in enumerate(rows, start=1):
        text = row.get(column)
        try:
            ts = parse_timestamp(text)
        except (TypeError, ValueError):
            raise UnparsableValue(f"cannot parse timestamp {text!r}", row_no, column, path) from None
        if prev is None:
            start = ts
        elif ts - prev != HOUR:
            raise NonHourlyGap(
                f"expected {format_timestamp(prev + HOUR)}, found {format_timestamp(ts)}",
                row_no, column, path,
            )
        prev = ts
    return start


def ingest_csv(path, schema: Optional[Mapping[str, str]] = None) -> EcomSeries:
    """Read a canonical hourly CSV into an :class:`EcomSeries`.

    ``schema`` maps the logical names (``timestamp``, ``sessions``,
    ``transactions``, ``revenue``, ``conversion``) to the column headers
    actually used in the file.  Revenue and conversion are optional.
    """
    cols = dict(DEFAULT_SCHEMA)
    if schema:
        cols.update(schema)
    path, header, rows = _read_rows(path, cols)
    for key in ("timestamp", "sessions", "transactions"):
        if cols[key] not in header:
            raise MissingColumn("required column not found", column=cols[key], path=path)
    if not rows:
        raise EmptyInput(f"file {path}: no data rows")
    start = _parse_times(rows, cols["timestamp"], path)

    sessions, transactions = [], []
    has_revenue = cols["revenue"] in header
    has_conversion = cols["conversion"] in header
    revenue = [] if has_revenue else None
    conversion = [] if has_conversion else None
    for row_no, row in enumerate(rows, start=1):
        sessions.append(_parse_count(row[cols["sessions"]], row_no, cols["sessions"], path))
        transactions.append(
            _parse_count(row[cols["transactions"]], row_no, cols["transactions"], path)
        )
        if has_revenue:
            revenue.append(_parse_amount(row[cols["revenue"]], row_no, cols["revenue"], path))
        if has_conversion:
            conversion.append(
                _parse_amount(row[cols["conversion"]], row_no, cols["conversion"], path)
            )
    return EcomSeries(start, sessions, transactions, revenue, conversion)


def read_labels(path, column: str = "label") -> np.ndarray:
    """Read a boolean ground-truth column (``0``/``1`` or ``true``/``false``)."""
    path, header, rows = _read_rows(path, {"timestamp": column})
    if column not in header:
        raise MissingColumn("label column not found", column=column, path=path)
    out = []
    for row_no, row in enumerate(rows, start=1):
        text = (row[column] or "").strip().lower()
        if text in ("1", "true", "yes"):
            out.append(True)
        elif text in ("0", "false", "no"):
            out.append(False)
        else:
            raise UnparsableValue(f"cannot parse label {text!r}", row_no, column, path)
    return np.array(out, dtype=bool)


def format_amount(value: float) -> str:
    """At least two decimals, but never lose precision."""
    text = f"{value:.2f}"
    return text if float(text) == value else repr(float(value))


def format_float(value: float) -> str:
    return repr(float(value))


def sidecar_path(path) -> Path:
    """JSON companion of an output file: same name, ``.json`` suffix."""
    return Path(path).with_suffix(".json")


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` next to ``path`` in a temp file, then rename over it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_rows(path, header: Sequence[str], rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    atomic_write_text(path, buf.getvalue())


def write_csv(path, data: EcomSeries, extra: Optional[Mapping[str, Sequence]] = None,
              include_conversion: bool = False) -> None:
    """Write ``data`` in the canonical format.

    ``extra`` appends further columns (e.g. ``label``); values are written
    with ``str``.  ``include_conversion`` adds the explicit conversion
    column so that rates which are not a ratio of the stored counts survive
    a round trip.
    """
    header = ["timestamp", "sessions", "transactions"]
    if data.revenue is not None:
        header.append("revenue")
    if include_conversion:
        header.append("conversion")
    extra = dict(extra or {})
    header.extend(extra)
    rows = []
    for i in range(len(data)):
        row = [
            format_timestamp(data.start_time + i * HOUR),
            str(int(data.sessions[i])),
            str(int(data.transactions[i])),
        ]
        if data.revenue is not None:
            row.append(format_amount(data.revenue[i]))
        if include_conversion:
            row.append(format_float(data.conversion[i]))
        row.extend(str(col[i]) for col in extra.values())
        rows.append(row)
    write_rows(path, header, rows)
