"""Synthetic hourly conversion-rate and sessions series with labelled outliers."""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from typing import Optional

import numpy as np

from .timeseries import EcomSeries, HourlySeries

DEFAULT_START = datetime(2017, 5, 1, tzinfo=timezone.utc)
BASKET_VALUE = 25.0


class Profile(str, enum.Enum):
    D1 = "D1"  # hour-of-day seasonality only
    D2 = "D2"  # plus trend
    D3 = "D3"  # plus hour-of-week seasonality


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of the generated conversion series.

    The profile zeroes the terms it excludes, so ``SynthConfig(profile="D1")``
    has no weekly or trend term whatever ``m_w``/``m_t`` say.
    """

    days: int = 90
    m_d: float = 0.05
    m_w: float = 0.01
    m_t: float = 0.02
    sigma: float = 0.005
    outlier_rate: float = 0.05
    seed: int = 0
    profile: Profile = Profile.D3
    # spike magnitudes: at least spike_scale * sigma, log-excess half-normal
    spike_scale: float = 6.0
    spike_log_sd: float = 0.5
    spike_up_prob: float = 0.7
    # sessions use the same functional form at their own scale
    sessions_daily: float = 400.0
    sessions_weekly: float = 50.0
    sessions_trend: float = 100.0
    sessions_sigma: float = 20.0
    start_time: datetime = field(default=DEFAULT_START)

    def __post_init__(self):
        object.__setattr__(self, "profile", Profile(str(self.profile).upper()
                                                    if not isinstance(self.profile, Profile)
                                                    else self.profile))
        if self.days < 1:
            raise ValueError("days must be positive")
        for name in ("m_d", "m_w", "m_t", "sigma", "spike_scale", "spike_log_sd",
                     "sessions_daily", "sessions_weekly", "sessions_trend", "sessions_sigma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not 0 <= self.outlier_rate <= 1:
            raise ValueError("outlier_rate must lie in [0, 1]")
        if not 0 <= self.spike_up_prob <= 1:
            raise ValueError("spike_up_prob must lie in [0, 1]")
        if self.profile is Profile.D1:
            object.__setattr__(self, "m_w", 0.0)
            object.__setattr__(self, "m_t", 0.0)
        elif self.profile is Profile.D2:
            object.__setattr__(self, "m_w", 0.0)

    @property
    def n(self) -> int:
        return self.days * 24

    def to_dict(self) -> dict:
        out = asdict(self)
        out["profile"] = self.profile.value
        out["start_time"] = self.start_time.strftime("%Y-%m-%dT%H:%M:%SZ")
        return out


@dataclass(frozen=True, eq=False)
class LabelledSeries:
    series: HourlySeries
    sessions: HourlySeries
    labels: np.ndarray
    config: Optional[SynthConfig] = None

    def __post_init__(self):
        labels = np.array(self.labels, dtype=bool, copy=True)
        if labels.shape != (len(self.series),) or len(self.sessions) != len(self.series):
            raise ValueError("series, sessions and labels must have the same length")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    def revenue(self, basket_value: float = BASKET_VALUE) -> np.ndarray:
        """Synthetic revenue: sessions x conversion x basket value."""
        return self.sessions.values * self.series.values * basket_value

    def to_ecom(self, basket_value: float = BASKET_VALUE) -> EcomSeries:
        """Package as an :class:`EcomSeries` (transactions rounded, conversion kept exact)."""
        sessions = self.sessions.values
        conversion = self.series.values
        transactions = np.rint(sessions * conversion)
        return EcomSeries(self.series.start_time, sessions, transactions,
                          self.revenue(basket_value), conversion)


def seasonal_signal(n: int, daily: float, weekly: float, trend: float) -> np.ndarray:
    """Noise-free generating form: two rectified sines and a linear ramp."""
    h = np.arange(n, dtype=float)
    h_max = max(n - 1, 1)
    return (daily * np.abs(np.sin(h * np.pi / 24))
            + weekly * np.abs(np.sin(h * np.pi / 168))
            + h / h_max * trend)


def _streams(seed):
    noise, spikes, sessions = np.random.SeedSequence(seed).spawn(3)
    return noise, spikes, sessions


def inject_outliers(base, rate: float, seed, scale: float = 6 * 0.005,
                    log_sd: float = 0.5, up_prob: float = 0.7):
    """Add skewed spikes at ``floor(rate * n)`` distinct random indices.

    Magnitudes are ``scale * exp(log_sd * |Z|)`` with standard normal ``Z``,
    i.e. never below ``scale`` and right-skewed above it; a spike points upward
    with probability ``up_prob``.  Where the base value is already at or
    below zero a downward spike would vanish under the final clamp, so it is
    turned upward instead.

    Returns
    -------
    values, labels : numpy.ndarray
        Spiked values clamped at zero, and the boolean mask of spiked points.
    """
    base = np.asarray(base, dtype=float)
    if not 0 <= rate <= 1:
        raise ValueError("rate must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    n = base.size
    k = int(np.floor(rate * n + 1e-9))
    labels = np.zeros(n, dtype=bool)
    values = base.copy()
    if k:
        idx = np.sort(rng.choice(n, size=k, replace=False))
        magnitude = scale * np.exp(log_sd * np.abs(rng.standard_normal(k)))
        up = rng.random(k) < up_prob
        up |= base[idx] <= 0
        values[idx] += np.where(up, magnitude, -magnitude)
        labels[idx] = True
    return np.maximum(values, 0.0), labels


def generate_sessions(config: SynthConfig, noise: bool = True) -> HourlySeries:
    """Hourly sessions: same form as the conversion series, rounded counts."""
    n = config.n
    values = seasonal_signal(n, config.sessions_daily, config.sessions_weekly,
                             config.sessions_trend)
    if noise and config.sessions_sigma > 0:
        rng = np.random.default_rng(_streams(config.seed)[2])
        values = values + rng.normal(0.0, config.sessions_sigma, n)
    return HourlySeries(config.start_time, np.maximum(np.rint(values), 0.0))


def generate_series(config: SynthConfig) -> LabelledSeries:
    """Generate the labelled conversion series and its companion sessions.

    Deterministic for a given config (seed included).
    """
    noise_seed, spike_seed, _ = _streams(config.seed)
    n = config.n
    base = seasonal_signal(n, config.m_d, config.m_w, config.m_t)
    if config.sigma > 0:
        base = base + np.random.default_rng(noise_seed).normal(0.0, config.sigma, n)
    # without noise the spikes keep the default 0.005 reference scale
    ref = config.sigma if config.sigma > 0 else SynthConfig.sigma
    values, labels = inject_outliers(
        base, config.outlier_rate, spike_seed, scale=config.spike_scale * ref,
        log_sd=config.spike_log_sd, up_prob=config.spike_up_prob,
    )
    return LabelledSeries(
        HourlySeries(config.start_time, values), generate_sessions(config), labels, config
    )
