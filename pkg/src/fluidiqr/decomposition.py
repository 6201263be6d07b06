"""Additive seasonal-trend decompositions: STL, MSTL and the piecewise-median variant.

All engines return a :class:`Decomposition` whose components add back up to
the observed series.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import PeriodsNotAscending, SeriesTooShort
from .loess import loess_at
from .timeseries import HOUR, HourlySeries, format_float, format_timestamp, write_rows

PERIODIC = "periodic"
DEFAULT_SEASONAL_WINDOW = 169
DEFAULT_MEDIAN_SPAN = 336
RECONSTRUCTION_TOL = 1e-9


class Method(str, enum.Enum):
    STL = "STL"
    STL_ROBUST = "STL_ROBUST"
    TWITTER = "TWITTER"
    MSTL = "MSTL"


def _next_odd(x: float) -> int:
    k = math.ceil(x - 1e-12)
    return k if k % 2 else k + 1


@dataclass(frozen=True)
class StlParams:
    """Window and iteration settings for one STL run.

    Windows left as ``None`` are derived from ``period``.  Iteration counts
    left as ``None`` follow the usual practice: one inner pass with fifteen
    robustness passes when ``robust``, otherwise two inner passes only.
    """

    period: int
    seasonal_window: Union[int, str] = DEFAULT_SEASONAL_WINDOW
    trend_window: Optional[int] = None
    lowpass_window: Optional[int] = None
    inner_iterations: Optional[int] = None
    outer_iterations: Optional[int] = None
    robust: bool = True

    def __post_init__(self):
        if self.period < 2:
            raise ValueError(f"period must be at least 2, got {self.period}")
        if self.seasonal_window != PERIODIC:
            _check_window("seasonal_window", self.seasonal_window)
        if self.trend_window is None:
            if self.seasonal_window == PERIODIC:
                tw = _next_odd(1.5 * self.period)
            else:
                tw = _next_odd(1.5 * self.period / (1.0 - 1.5 / self.seasonal_window))
            object.__setattr__(self, "trend_window", max(tw, 3))
        if self.lowpass_window is None:
            object.__setattr__(self, "lowpass_window", max(_next_odd(self.period), 3))
        _check_window("trend_window", self.trend_window)
        _check_window("lowpass_window", self.lowpass_window)
        if self.inner_iterations is None:
            object.__setattr__(self, "inner_iterations", 1 if self.robust else 2)
        if self.outer_iterations is None:
            object.__setattr__(self, "outer_iterations", 15 if self.robust else 0)
        if self.inner_iterations < 1:
            raise ValueError("inner_iterations must be positive")
        if self.robust and self.outer_iterations < 1:
            raise ValueError("robust fitting needs at least one outer iteration")
        if not self.robust and self.outer_iterations != 0:
            raise ValueError("outer_iterations must be 0 when robust is false")


def _check_window(name, value):
    if not isinstance(value, (int, np.integer)) or value < 3 or value % 2 == 0:
        raise ValueError(f"{name} must be an odd integer >= 3, got {value!r}")


@dataclass(frozen=True, eq=False)
class Decomposition:
    observed: HourlySeries
    trend: np.ndarray
    seasonals: tuple  # ((period, component), ...) in ascending period order
    remainder: np.ndarray
    robustness_weights: np.ndarray
    method: Method
    periods: tuple = field(init=False)

    def __post_init__(self):
        n = len(self.observed)
        trend = _readonly(self.trend, n, "trend")
        remainder = _readonly(self.remainder, n, "remainder")
        weights = _readonly(self.robustness_weights, n, "robustness_weights")
        seasonals = tuple((int(p), _readonly(s, n, f"seasonal{p}")) for p, s in self.seasonals)
        if np.any(weights < 0) or np.any(weights > 1):
            raise ValueError("robustness weights must lie in [0, 1]")
        total = trend + remainder
        for _, s in seasonals:
            total = total + s
        err = np.max(np.abs(self.observed.values - total))
        scale = max(1.0, float(np.max(np.abs(self.observed.values))))
        if err > RECONSTRUCTION_TOL * scale:
            raise ValueError(f"components do not reconstruct the series (error {err:.3g})")
        object.__setattr__(self, "trend", trend)
        object.__setattr__(self, "remainder", remainder)
        object.__setattr__(self, "robustness_weights", weights)
        object.__setattr__(self, "seasonals", seasonals)
        object.__setattr__(self, "method", Method(self.method))
        object.__setattr__(self, "periods", tuple(p for p, _ in seasonals))

    def seasonal(self, period: Optional[int] = None) -> np.ndarray:
        """One seasonal component, or their sum when ``period`` is None."""
        if period is None:
            total = np.zeros(len(self.observed))
            for _, s in self.seasonals:
                total = total + s
            return total
        for p, s in self.seasonals:
            if p == period:
                return s
        raise KeyError(period)

    def reconstruction_error(self) -> float:
        fitted = self.trend + self.seasonal() + self.remainder
        return float(np.max(np.abs(self.observed.values - fitted)))


def _readonly(values, n, name):
    arr = np.array(values, dtype=float, copy=True)
    if arr.shape != (n,):
        raise ValueError(f"{name} has shape {arr.shape}, expected ({n},)")
    arr.setflags(write=False)
    return arr


# ------------------------------------------------------------------ robustness


def bisquare(u):
    """``(1 - u**2)**2`` on ``[0, 1)`` and 0 from 1 onwards."""
    u = np.minimum(np.abs(np.asarray(u, dtype=float)), 1.0)
    out = (1.0 - u * u) ** 2
    return float(out) if out.ndim == 0 else out


def robustness_weights(remainder) -> np.ndarray:
    """Bisquare weights of the remainder scaled by six median absolute values."""
    r = np.abs(np.asarray(remainder, dtype=float))
    if r.size == 0:
        raise ValueError("remainder must not be empty")
    h = 6.0 * np.median(r)
    if h == 0:
        return np.ones_like(r)
    return bisquare(r / h)


# ------------------------------------------------------------------------- STL


def _moving_average(x, k):
    return np.convolve(x, np.full(k, 1.0 / k), mode="valid")


def _cycle_subseries(detrended, period, window, weights, degree=1):
    """Smooth each phase's subseries and extend it one cycle on both sides.

    Returns an array of length ``n + 2 * period`` whose entry ``j`` holds the
    smoothed value for time ``j - period``.
    """
    n = detrended.size
    out = np.empty(n + 2 * period)
    full = n // period
    # phases [0, extra) have one more observation than the rest
    extra = n - full * period
    groups = [(0, extra, full + 1), (extra, period, full)]
    for lo, hi, m in groups:
        if hi <= lo:
            continue
        phases = np.arange(lo, hi)
        cols = phases[:, None] + period * np.arange(m)[None, :]
        sub = detrended[cols]
        rob = None if weights is None else weights[cols]
        if window == PERIODIC:
            fit = np.repeat(_periodic_mean(sub, rob)[:, None], m + 2, axis=1)
        else:
            fit = loess_at(sub, np.arange(-1, m + 1), window, degree, rob)
        out[phases[:, None] + period * np.arange(m + 2)[None, :]] = fit
    return out


def _periodic_mean(sub, rob):
    if rob is None:
        return sub.mean(axis=1)
    total = rob.sum(axis=1)
    safe = np.where(total > 0, total, 1.0)
    return np.where(total > 0, (sub * rob).sum(axis=1) / safe, sub.mean(axis=1))


def _lowpass(c, period, window):
    lp = _moving_average(c, period)
    lp = _moving_average(lp, period)
    lp = _moving_average(lp, 3)
    return loess_at(lp, np.arange(lp.size), window, 1)


def _stl_core(y, params: StlParams):
    n = y.size
    p = params.period
    trend = np.zeros(n)
    seasonal = np.zeros(n)
    weights = None
    for outer in range(params.outer_iterations + 1):
        for _ in range(params.inner_iterations):
            cycle = _cycle_subseries(y - trend, p, params.seasonal_window, weights)
            low = _lowpass(cycle, p, params.lowpass_window)
            seasonal = cycle[p:p + n] - low
            trend = loess_at(y - seasonal, np.arange(n), params.trend_window, 1, weights)
        if outer < params.outer_iterations:
            weights = robustness_weights(y - seasonal - trend)
    if params.robust:
        final_weights = robustness_weights(y - seasonal - trend)
    else:
        final_weights = np.ones(n)
    return trend, seasonal, final_weights


def stl_fit(series: HourlySeries, params: StlParams) -> Decomposition:
    """Seasonal-trend decomposition by LOESS for a single period.

    The inner loop alternates cycle-subseries smoothing, low-pass filtering
    and trend smoothing; when ``params.robust`` is set an outer loop
    recomputes bisquare robustness weights from the remainder and feeds them
    into the subseries and trend smoothers.
    """
    y = series.values
    if y.size < 2 * params.period:
        raise SeriesTooShort(
            f"STL with period {params.period} needs {2 * params.period} points, got {y.size}"
        )
    trend, seasonal, weights = _stl_core(y, params)
    remainder = y - trend - seasonal
    method = Method.STL_ROBUST if params.robust else Method.STL
    return Decomposition(series, trend, ((params.period, seasonal),), remainder, weights, method)


# ------------------------------------------------------------ piecewise median


def piecewise_median(values, span: int) -> np.ndarray:
    """Median of consecutive blocks of ``span`` points (last block may be short)."""
    values = np.asarray(values, dtype=float)
    if span < 1:
        raise ValueError("span must be positive")
    out = np.empty_like(values)
    for start in range(0, values.size, span):
        block = values[start:start + span]
        out[start:start + span] = np.median(block)
    return out


def twitter_fit(series: HourlySeries, period: int, median_span: int = DEFAULT_MEDIAN_SPAN,
                seasonal_window: Union[int, str] = DEFAULT_SEASONAL_WINDOW) -> Decomposition:
    """STL seasonal component with the trend replaced by block medians."""
    y = series.values
    if y.size < 2 * period:
        raise SeriesTooShort(f"period {period} needs {2 * period} points, got {y.size}")
    if median_span < period:
        raise ValueError(f"median_span ({median_span}) must be at least the period ({period})")
    base = stl_fit(series, StlParams(period, seasonal_window=seasonal_window, robust=False))
    seasonal = base.seasonal(period)
    trend = piecewise_median(y, median_span)
    remainder = y - trend - seasonal
    return Decomposition(
        series, trend, ((period, seasonal),), remainder, np.ones(y.size), Method.TWITTER
    )


# ------------------------------------------------------------------------ MSTL


def mstl_fit(series: HourlySeries, periods: Sequence[int],
             params: Optional[Sequence[StlParams]] = None, rounds: int = 2,
             robust: bool = True) -> Decomposition:
    """Iterated STL extracting one seasonal component per period.

    Parameters
    ----------
    series : HourlySeries
    periods : sequence of int
        Strictly ascending seasonal periods, e.g. ``(24, 168)``.
    params : sequence of StlParams, optional
        One entry per period; their ``period`` fields must match.  Defaults
        to ``StlParams(p, robust=robust)`` for each period.
    rounds : int
        Refinement passes over all periods.
    """
    periods = [int(p) for p in periods]
    if not periods:
        raise ValueError("at least one period is required")
    if any(b <= a for a, b in zip(periods, periods[1:])):
        raise PeriodsNotAscending(f"periods must be strictly ascending, got {periods}")
    y = series.values
    if y.size < 2 * periods[-1]:
        raise SeriesTooShort(f"period {periods[-1]} needs {2 * periods[-1]} points, got {y.size}")
    if params is None:
        params = [StlParams(p, robust=robust) for p in periods]
    params = list(params)
    if [p.period for p in params] != periods:
        raise ValueError("params must list one StlParams per period, in order")
    if rounds < 1:
        raise ValueError("rounds must be positive")

    seasonals = {p: np.zeros(y.size) for p in periods}
    deseasonal = y.copy()
    trend = weights = None
    for _ in range(rounds):
        for p, prm in zip(periods, params):
            deseasonal = deseasonal + seasonals[p]
            trend, seasonals[p], weights = _stl_core(deseasonal, prm)
            deseasonal = deseasonal - seasonals[p]
    components = tuple((p, seasonals[p]) for p in periods)
    remainder = y - trend - sum(seasonals.values())
    return Decomposition(series, trend, components, remainder, weights, Method.MSTL)


# ------------------------------------------------------------------------- I/O

CSV_HEADER = ("timestamp", "observed", "trend", "seasonal24", "seasonal168", "remainder",
              "robust_weight")


def write_decomposition(path, decomp: Decomposition) -> None:
    """Write components as CSV; seasonal periods other than 24/168 get extra columns."""
    extra = [p for p in decomp.periods if p not in (24, 168)]
    header = list(CSV_HEADER[:5]) + [f"seasonal{p}" for p in extra] + list(CSV_HEADER[5:])
    n = len(decomp.observed)
    zeros = np.zeros(n)
    cols = {p: s for p, s in decomp.seasonals}
    start = decomp.observed.start_time
    rows = []
    for i in range(n):
        row = [format_timestamp(start + i * HOUR), format_float(decomp.observed.values[i]),
               format_float(decomp.trend[i]),
               format_float(cols.get(24, zeros)[i]), format_float(cols.get(168, zeros)[i])]
        row.extend(format_float(cols[p][i]) for p in extra)
        row.append(format_float(decomp.remainder[i]))
        row.append(format_float(decomp.robustness_weights[i]))
        rows.append(row)
    write_rows(path, header, rows)
