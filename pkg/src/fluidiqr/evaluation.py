"""Scoring detections: confusion metrics against labels and revenue relevance."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from datetime import datetime
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .decomposition import DEFAULT_MEDIAN_SPAN, mstl_fit, stl_fit, twitter_fit, StlParams
from .detection import FenceConfig, FenceMode, OutlierReport, detect
from .errors import LengthMismatch, SeriesTooShort
from .synth import LabelledSeries
from .timeseries import EcomSeries, HourlySeries, atomic_write_text, sidecar_path, write_rows

HOURS_PER_WEEK = 168


class Pipeline(str, enum.Enum):
    TWITTER = "TWITTER"
    STL = "STL"
    MSTL = "MSTL"
    FLUID = "FLUID"


ALL_PIPELINES = (Pipeline.TWITTER, Pipeline.STL, Pipeline.MSTL, Pipeline.FLUID)


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class EvalReport:
    """Detection quality for one method.

    Ratios whose denominator is zero are ``None`` rather than NaN; the
    label-dependent fields are all ``None`` when no labels were supplied,
    and ``tadr`` is ``None`` without revenue.
    """

    total_outliers: int
    matrix: Optional[ConfusionMatrix] = None
    accuracy: Optional[float] = None
    sensitivity: Optional[float] = None
    specificity: Optional[float] = None
    tadr: Optional[float] = None
    method: Optional[str] = None

    def as_row(self) -> dict:
        return {"method": self.method, "total_outliers": self.total_outliers,
                "accuracy": self.accuracy, "sensitivity": self.sensitivity,
                "specificity": self.specificity, "tadr": self.tadr}


def _ratio(num, den):
    return num / den if den else None


def confusion_metrics(labels, flags) -> EvalReport:
    labels = np.asarray(labels, dtype=bool)
    flags = np.asarray(flags, dtype=bool)
    if labels.shape != flags.shape:
        raise LengthMismatch(f"labels have {labels.size} points, flags {flags.size}")
    tp = int(np.sum(labels & flags))
    fp = int(np.sum(~labels & flags))
    tn = int(np.sum(~labels & ~flags))
    fn = int(np.sum(labels & ~flags))
    cm = ConfusionMatrix(tp, fp, tn, fn)
    return EvalReport(
        total_outliers=tp + fp, matrix=cm,
        accuracy=_ratio(tp + tn, cm.total),
        sensitivity=_ratio(tp, tp + fn),
        specificity=_ratio(tn, tn + fp),
    )


def hour_of_week(start_time: datetime, n: int) -> np.ndarray:
    """Slot 0..167 of each hour, Monday 00:00 UTC being slot 0."""
    first = start_time.weekday() * 24 + start_time.hour
    return (first + np.arange(n)) % HOURS_PER_WEEK


def hour_of_week_median(revenue, start_time: datetime) -> np.ndarray:
    """Median revenue of every hour-of-week slot (168 values)."""
    r = np.asarray(revenue, dtype=float)
    if r.size < HOURS_PER_WEEK:
        raise SeriesTooShort(f"need at least {HOURS_PER_WEEK} hours, got {r.size}")
    slots = hour_of_week(start_time, r.size)
    return np.array([np.quantile(r[slots == k], 0.5, method="linear")
                     for k in range(HOURS_PER_WEEK)])


def tadr(flags, revenue, medians, start_time: datetime) -> float:
    """Total absolute deviation of flagged revenue from its slot median."""
    flags = np.asarray(flags, dtype=bool)
    r = np.asarray(revenue, dtype=float)
    medians = np.asarray(medians, dtype=float)
    if flags.shape != r.shape:
        raise LengthMismatch(f"flags have {flags.size} points, revenue {r.size}")
    if medians.shape != (HOURS_PER_WEEK,):
        raise LengthMismatch(f"expected {HOURS_PER_WEEK} medians, got {medians.size}")
    slots = hour_of_week(start_time, r.size)
    return float(np.sum(np.abs(r[flags] - medians[slots[flags]])))


# ------------------------------------------------------------------- pipelines


def _as_pipeline(value) -> Pipeline:
    if isinstance(value, Pipeline):
        return value
    return Pipeline(str(value).upper())


def run_pipeline(method: Union[Pipeline, str], conversion: HourlySeries, sessions=None,
                 fence: Optional[FenceConfig] = None) -> OutlierReport:
    """Decompose and fence one series the way ``method`` prescribes.

    ``TWITTER`` is the block-median variant, ``STL`` robust single-period STL,
    ``MSTL`` robust 24/168 MSTL, each with the outer fence on the raw
    remainder; ``FLUID`` is robust MSTL with the fluid fence.
    """
    method = _as_pipeline(method)
    if method is Pipeline.TWITTER:
        decomp = twitter_fit(conversion, 24, DEFAULT_MEDIAN_SPAN)
    elif method is Pipeline.STL:
        decomp = stl_fit(conversion, StlParams(24, robust=True))
    else:
        decomp = mstl_fit(conversion, (24, 168), robust=True)
    if fence is None:
        fence = FenceConfig(FenceMode.FLUID if method is Pipeline.FLUID
                            else FenceMode.STANDARD_OUTER)
    report = detect(decomp.remainder, fence, sessions)
    return report


def compare_methods(data: Union[EcomSeries, LabelledSeries],
                    methods: Iterable[Union[Pipeline, str]] = ALL_PIPELINES,
                    labels=None, revenue=None) -> list[EvalReport]:
    """Run each pipeline on ``data`` and score it.

    For a :class:`LabelledSeries` the labels default to its ground truth and
    revenue to sessions x conversion x basket value.  An :class:`EcomSeries`
    is scored against ``labels`` only if given; TADR needs revenue.
    """
    if isinstance(data, LabelledSeries):
        conversion, sessions = data.series, data.sessions.values
        if labels is None:
            labels = data.labels
        if revenue is None:
            revenue = data.revenue()
    else:
        conversion, sessions = data.base, data.sessions
        if revenue is None:
            revenue = data.revenue
    start = conversion.start_time
    if labels is not None:
        labels = np.asarray(labels, dtype=bool)
        if labels.size != len(conversion):
            raise LengthMismatch(f"labels have {labels.size} points, data {len(conversion)}")
    medians = hour_of_week_median(revenue, start) if revenue is not None else None

    rows = []
    cache = {}
    for m in methods:
        m = _as_pipeline(m)
        report = _cached_pipeline(m, conversion, sessions, cache)
        flags = report.flags
        if labels is not None:
            base = confusion_metrics(labels, flags)
        else:
            base = EvalReport(total_outliers=int(flags.sum()))
        value = tadr(flags, revenue, medians, start) if medians is not None else None
        rows.append(EvalReport(base.total_outliers, base.matrix, base.accuracy,
                               base.sensitivity, base.specificity, value, m.value))
    return rows


def _cached_pipeline(method, conversion, sessions, cache):
    # MSTL and FLUID share one decomposition
    if method in (Pipeline.MSTL, Pipeline.FLUID):
        if "mstl" not in cache:
            cache["mstl"] = mstl_fit(conversion, (24, 168), robust=True)
        remainder = cache["mstl"].remainder
        mode = FenceMode.FLUID if method is Pipeline.FLUID else FenceMode.STANDARD_OUTER
        return detect(remainder, FenceConfig(mode), sessions)
    return run_pipeline(method, conversion, sessions)


# ------------------------------------------------------------------------- I/O

TABLE_HEADER = ("method", "total_outliers", "accuracy", "sensitivity", "specificity", "tadr")


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_table(path, reports: Sequence[EvalReport]) -> None:
    """Metrics table as CSV plus a JSON copy beside it."""
    rows = [[_cell(r.as_row()[k]) for k in TABLE_HEADER] for r in reports]
    write_rows(path, TABLE_HEADER, rows)
    payload = []
    for r in reports:
        row = r.as_row()
        if r.matrix is not None:
            row["confusion"] = {"tp": r.matrix.tp, "fp": r.matrix.fp,
                                "tn": r.matrix.tn, "fn": r.matrix.fn}
        payload.append(row)
    atomic_write_text(sidecar_path(path), json.dumps(payload, indent=2) + "\n")
