"""Locally weighted polynomial regression on an equally spaced grid.

Every target point is fitted from its ``window`` nearest neighbours with
tricube distance weights, optionally multiplied by per-point robustness
weights.  All fits of one call are evaluated in a single vectorised pass.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import EmptyInput

# relative spread below which a local line/parabola is treated as singular
_SINGULAR_TOL = 1e-10


@dataclass(frozen=True)
class LoessParams:
    window: int
    degree: int = 1

    def __post_init__(self):
        if self.degree not in (0, 1, 2):
            raise ValueError(f"degree must be 0, 1 or 2, got {self.degree}")
        if self.window < 1 or self.window % 2 == 0:
            raise ValueError(f"window must be a positive odd integer, got {self.window}")
        if self.window < self.degree + 1:
            raise ValueError("window must be at least degree + 1")


def tricube(u):
    u = np.clip(np.abs(u), 0.0, 1.0)
    return (1.0 - u**3) ** 3


def neighbourhoods(n: int, positions: np.ndarray, window: int) -> np.ndarray:
    """Index matrix of the ``window`` nearest grid points to each position.

    Positions are integers, possibly outside ``[0, n)``.  Near the edges the
    block is clamped to the series, which is the nearest-``q`` set; in the
    interior an odd window is symmetric so distance ties cannot arise.
    """
    q = min(window, n)
    lo = np.clip(positions - (q - 1) // 2, 0, n - q)
    return lo[:, None] + np.arange(q)[None, :]


@lru_cache(maxsize=64)
def _geometry(n: int, first: int, count: int, window: int):
    positions = np.arange(first, first + count)
    idx = neighbourhoods(n, positions, window)
    u = (idx - positions[:, None]).astype(float)
    dist = np.abs(u)
    dmax = dist.max(axis=1)
    scaled = np.divide(dist, dmax[:, None], out=np.zeros_like(dist), where=dmax[:, None] > 0)
    for arr in (idx, u, dmax):
        arr.setflags(write=False)
    w = tricube(scaled)
    w.setflags(write=False)
    return idx, u, w, dmax


def loess_at(y, positions, window: int, degree: int = 1,
             robustness: Optional[np.ndarray] = None) -> np.ndarray:
    """Evaluate the local fit at consecutive integer ``positions``.

    ``positions`` may extend past either end of the grid.  ``y`` may be a
    2-D batch of equally long series (one per row) sharing the geometry; the
    result then has one row per series.
    """
    y = np.asarray(y, dtype=float)
    n = y.shape[-1]
    if n == 0:
        raise EmptyInput("loess needs at least one value")
    positions = np.asarray(positions, dtype=np.int64)
    first, count = int(positions[0]), positions.size
    if count > 1 and not np.array_equal(positions, np.arange(first, first + count)):
        raise ValueError("positions must be consecutive integers")
    idx, u, w, dmax = _geometry(n, first, count, int(window))
    batch = y.reshape(-1, n)
    yy = batch[:, idx]
    ww = np.broadcast_to(w, yy.shape)
    if robustness is not None:
        ww = ww * np.asarray(robustness, dtype=float).reshape(-1, n)[:, idx]
    q = idx.shape[1]
    uu = np.broadcast_to(u, yy.shape).reshape(-1, q)
    dd = np.broadcast_to(dmax, yy.shape[:2]).reshape(-1)
    out = _local_fit(uu, yy.reshape(-1, q), ww.reshape(-1, q), degree, dd)
    return out.reshape(y.shape[:-1] + (count,))


def _weighted_mean(w, yy):
    sw = w.sum(axis=1)
    out = np.empty(w.shape[0])
    ok = sw > 0
    out[ok] = (w[ok] * yy[ok]).sum(axis=1) / sw[ok]
    # every weight zeroed by robustness: plain neighbourhood mean
    out[~ok] = yy[~ok].mean(axis=1)
    return out, ok


def _local_fit(u, yy, w, degree, dmax):
    mean, ok = _weighted_mean(w, yy)
    if degree == 0:
        return mean
    sw = w.sum(axis=1)
    safe = np.where(ok, sw, 1.0)
    ubar = (w * u).sum(axis=1) / safe
    du = u - ubar[:, None]
    spread = (w * du * du).sum(axis=1) / safe
    scale = np.maximum(dmax, 1.0) ** 2
    fit_ok = ok & (spread > _SINGULAR_TOL * scale)
    out = mean.copy()
    if degree == 1:
        slope = np.zeros_like(mean)
        num = (w * du * (yy - mean[:, None])).sum(axis=1)
        slope[fit_ok] = num[fit_ok] / (spread[fit_ok] * sw[fit_ok])
        # value of the line at u = 0
        out[fit_ok] = mean[fit_ok] - slope[fit_ok] * ubar[fit_ok]
        return out
    # degree 2: solve each 3x3 normal system around u = 0
    rows = np.flatnonzero(fit_ok)
    if rows.size:
        uu = u[rows] / np.maximum(dmax[rows], 1.0)[:, None]
        ww = w[rows]
        basis = np.stack([np.ones_like(uu), uu, uu * uu], axis=2)
        a = np.einsum("ni,nij,nik->njk", ww, basis, basis)
        b = np.einsum("ni,nij,ni->nj", ww, basis, yy[rows])
        det = np.linalg.det(a)
        norm = np.abs(a).max(axis=(1, 2)) ** 3
        good = np.abs(det) > _SINGULAR_TOL * norm
        if good.any():
            coef = np.linalg.solve(a[good], b[good][..., None])[..., 0]
            out[rows[good]] = coef[:, 0]
    return out


def loess_smooth(y, params: LoessParams, robustness=None) -> np.ndarray:
    """Smooth ``y`` at every grid point.

    Parameters
    ----------
    y : array_like
        Equally spaced observations.
    params : LoessParams
        Neighbourhood size and local polynomial degree.  A window larger
        than the series uses every point.
    robustness : array_like, optional
        Per-point weights in ``[0, 1]`` multiplied into the tricube weights.

    Returns
    -------
    numpy.ndarray
        Fitted values, same length as ``y``.  A neighbourhood whose design is
        singular falls back to its weighted mean.
    """
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise EmptyInput("loess needs at least one value")
    if robustness is not None:
        robustness = np.asarray(robustness, dtype=float)
        if robustness.shape != y.shape:
            raise ValueError("robustness weights must match the series length")
    return loess_at(y, np.arange(y.size), params.window, params.degree, robustness)
