"""Conversion-rate outlier detection on decomposed hourly series.

Decompose an hourly conversion series (robust STL, MSTL or the
piecewise-median variant), then fence the remainder with Tukey's rule or
with the session-scaled fluid fence.
"""

__version__ = "0.1.0"

from .decomposition import (
    Decomposition,
    StlParams,
    bisquare,
    mstl_fit,
    robustness_weights,
    stl_fit,
    twitter_fit,
)
from .detection import (
    FenceConfig,
    FenceMode,
    OutlierReport,
    fluid_iqr_detect,
    fluid_weight,
    standard_iqr_detect,
)
from .evaluation import compare_methods, confusion_metrics, hour_of_week_median, tadr
from .loess import LoessParams, loess_smooth
from .synth import LabelledSeries, SynthConfig, generate_series, generate_sessions
from .timeseries import (
    EcomSeries,
    HourlySeries,
    Quartiles,
    asinh_transform,
    conversion_rate,
    ingest_csv,
    quartiles,
    write_csv,
)
