"""Tukey-fence outlier detection on decomposition remainders.

Three fences are supported: the inner (1.5 IQR) and outer (3 IQR) fences of
the boxplot rule, and the fluid fence whose multiplier slides from a wide
value in the quietest hour to a narrow one in the busiest hour.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import LengthMismatch, TooFewPoints
from .timeseries import (
    HOUR,
    asinh_transform,
    atomic_write_text,
    format_float,
    format_timestamp,
    quartiles,
    sidecar_path,
    write_rows,
)

INNER = 1.5
OUTER = 3.0


class FenceMode(str, enum.Enum):
    STANDARD_INNER = "STANDARD_INNER"
    STANDARD_OUTER = "STANDARD_OUTER"
    FLUID = "FLUID"


class Direction(str, enum.Enum):
    LOW = "LOW"
    HIGH = "HIGH"


@dataclass(frozen=True)
class FenceConfig:
    mode: FenceMode = FenceMode.FLUID
    w_low_activity: float = OUTER
    w_high_activity: float = INNER
    transform_remainder: Optional[bool] = None  # None: only for FLUID
    transform_sessions: bool = True

    def __post_init__(self):
        object.__setattr__(self, "mode", FenceMode(self.mode))
        if self.w_high_activity <= 0 or self.w_low_activity <= 0:
            raise ValueError("fence multipliers must be positive")
        if self.w_high_activity > self.w_low_activity:
            raise ValueError("w_high_activity must not exceed w_low_activity")
        if self.transform_remainder is None:
            object.__setattr__(self, "transform_remainder", self.mode is FenceMode.FLUID)

    @property
    def multiplier(self) -> float:
        """Constant multiplier of the standard modes."""
        if self.mode is FenceMode.STANDARD_INNER:
            return INNER
        if self.mode is FenceMode.STANDARD_OUTER:
            return OUTER
        return (self.w_low_activity + self.w_high_activity) / 2


@dataclass(frozen=True, eq=False)
class OutlierReport:
    """Flags plus the per-point fence that produced them.

    ``values`` are the inputs as given; ``transformed`` is what was actually
    compared with the fences (identical unless a transform was applied).
    """

    indices: np.ndarray
    directions: tuple
    fence_low: np.ndarray
    fence_high: np.ndarray
    w_used: np.ndarray
    method: str
    values: np.ndarray
    transformed: np.ndarray

    @property
    def flags(self) -> np.ndarray:
        mask = np.zeros(self.values.size, dtype=bool)
        mask[self.indices] = True
        return mask

    @property
    def total_flags(self) -> int:
        return int(self.indices.size)

    def summary(self) -> dict:
        return {"method": self.method, "total_flags": self.total_flags,
                "indices": [int(i) for i in self.indices]}


def _fence(values, transformed, w, method) -> OutlierReport:
    n = transformed.size
    if n < 4:
        raise TooFewPoints(f"fences need at least 4 points, got {n}")
    q = quartiles(transformed)
    w = np.broadcast_to(np.asarray(w, dtype=float), (n,)).copy()
    low = q.q1 - w * q.iqr
    high = q.q3 + w * q.iqr
    below = transformed < low
    above = transformed > high
    idx = np.flatnonzero(below | above)
    directions = tuple(Direction.LOW if below[i] else Direction.HIGH for i in idx)
    return OutlierReport(idx, directions, low, high, w, method,
                         np.asarray(values, dtype=float), transformed)


def standard_iqr_detect(remainder, multiplier: float, method: Optional[str] = None
                        ) -> OutlierReport:
    """Flag values strictly outside ``[q1 - k IQR, q3 + k IQR]``."""
    if multiplier <= 0:
        raise ValueError("multiplier must be positive")
    r = np.asarray(remainder, dtype=float)
    return _fence(r, r, multiplier, method or f"IQR({multiplier:g})")


def fluid_weight(sessions_value, sessions_min, sessions_max, config: FenceConfig):
    """Fence multiplier falling linearly from the quietest to the busiest hour.

    Equals ``config.w_low_activity`` at ``sessions_min`` and
    ``config.w_high_activity`` at ``sessions_max``.  Without any spread in
    activity the midpoint of the two is used.
    """
    s = np.asarray(sessions_value, dtype=float)
    w_lo, w_hi = config.w_low_activity, config.w_high_activity
    span = sessions_max - sessions_min
    if span == 0:
        out = np.full_like(s, (w_lo + w_hi) / 2)
    else:
        out = w_lo - (s - sessions_min) / span * (w_lo - w_hi)
    return float(out) if out.ndim == 0 else out


def fluid_iqr_detect(remainder, sessions, config: FenceConfig = FenceConfig()) -> OutlierReport:
    """Session-scaled Tukey fence.

    The (optionally asinh-transformed) remainder is fenced with the global
    quartiles, but each hour gets its own multiplier from
    :func:`fluid_weight` applied to its (optionally asinh-transformed)
    session count.
    """
    r = np.asarray(remainder, dtype=float)
    s = np.asarray(sessions, dtype=float)
    if r.shape != s.shape:
        raise LengthMismatch(f"remainder has {r.size} points, sessions {s.size}")
    if r.size < 4:
        raise TooFewPoints(f"fences need at least 4 points, got {r.size}")
    t = asinh_transform(r) if config.transform_remainder else r
    act = asinh_transform(s) if config.transform_sessions else s
    w = fluid_weight(act, act.min(), act.max(), config)
    return _fence(r, t, w, FenceMode.FLUID.value)


def detect(remainder, config: FenceConfig, sessions=None) -> OutlierReport:
    """Apply the fence selected by ``config.mode``."""
    if config.mode is FenceMode.FLUID:
        if sessions is None:
            raise ValueError("the fluid fence needs sessions")
        return fluid_iqr_detect(remainder, sessions, config)
    r = np.asarray(remainder, dtype=float)
    t = asinh_transform(r) if config.transform_remainder else r
    if t.size < 4:
        raise TooFewPoints(f"fences need at least 4 points, got {t.size}")
    return _fence(r, t, config.multiplier, config.mode.value)


REPORT_HEADER = ("timestamp", "value", "transformed", "fence_low", "fence_high", "w", "flag",
                 "direction")


def write_report(path, report: OutlierReport, start_time) -> None:
    """CSV with one row per hour plus a JSON summary beside it (``.json`` suffix)."""
    flags = report.flags
    direction = [""] * report.values.size
    for i, d in zip(report.indices, report.directions):
        direction[i] = d.value
    rows = []
    for i in range(report.values.size):
        rows.append([
            format_timestamp(start_time + i * HOUR), format_float(report.values[i]),
            format_float(report.transformed[i]), format_float(report.fence_low[i]),
            format_float(report.fence_high[i]), format_float(report.w_used[i]),
            int(flags[i]), direction[i],
        ])
    write_rows(path, REPORT_HEADER, rows)
    atomic_write_text(sidecar_path(path), json.dumps(report.summary(), indent=2) + "\n")
