"""Forecast accuracy metrics and curve-shape diagnostics.

Conventions for array layout: the last axis is the channel axis; for the
shape diagnostics a rank-3 array is ``(windows, horizon, channels)``, a rank-2
array is a single ``(horizon, channels)`` window and a rank-1 array a single
univariate window.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DegenerateError, ShapeError

log = logging.getLogger(__name__)

# summaries label a forecast "over-fluctuating" above this total-variation ratio
OVER_FLUCTUATION_THRESHOLD = 1.15


def _pair(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ShapeError(f"prediction shape {pred.shape} != truth shape {truth.shape}")
    if pred.size == 0:
        raise ShapeError("empty arrays")
    return pred, truth


def mse(pred, truth) -> float:
    pred, truth = _pair(pred, truth)
    return float(np.mean((pred - truth) ** 2))


def mae(pred, truth) -> float:
    pred, truth = _pair(pred, truth)
    return float(np.mean(np.abs(pred - truth)))


def rse(pred, truth) -> float:
    """Root relative squared error against the grand mean of ``truth``."""
    pred, truth = _pair(pred, truth)
    denom = np.sqrt(np.sum((truth - truth.mean()) ** 2))
    if denom == 0:
        raise DegenerateError("rse undefined: truth is constant")
    return float(np.sqrt(np.sum((truth - pred) ** 2)) / denom)


def corr(pred, truth) -> float:
    """Per-channel Pearson correlation over time, averaged over channels.

    All axes but the last are treated as time.  Channels where either series
    is constant are left out of the average.
    """
    pred, truth = _pair(pred, truth)
    if pred.ndim == 1:
        pred, truth = pred[:, None], truth[:, None]
    p = pred.reshape(-1, pred.shape[-1])
    t = truth.reshape(-1, truth.shape[-1])
    dp = p - p.mean(axis=0)
    dt = t - t.mean(axis=0)
    var_p = np.sum(dp**2, axis=0)
    var_t = np.sum(dt**2, axis=0)
    ok = (var_p > 0) & (var_t > 0)
    if not ok.any():
        raise DegenerateError("corr undefined: every channel is constant")
    if not ok.all():
        log.warning("corr: skipping constant channels %s", np.flatnonzero(~ok).tolist())
    r = np.sum(dp[:, ok] * dt[:, ok], axis=0) / np.sqrt(var_p[ok] * var_t[ok])
    return float(np.clip(r.mean(), -1.0, 1.0))


def _windows(a: np.ndarray) -> np.ndarray:
    if a.ndim == 1:
        return a[None, :, None]
    if a.ndim == 2:
        return a[None]
    if a.ndim == 3:
        return a
    raise ShapeError(f"expected rank 1-3 array, got shape {a.shape}")


def total_variation(a, axis: int = -1) -> np.ndarray:
    return np.sum(np.abs(np.diff(a, axis=axis)), axis=axis)


def fluctuation_index(pred, truth) -> float:
    """Mean ratio TV(pred) / TV(truth) over windows and channels.

    TV is the total variation along the horizon.  Values above 1 mean the
    forecast wiggles more than the ground truth.  Window/channel pairs with a
    flat ground truth are skipped.
    """
    pred, truth = _pair(pred, truth)
    p, t = _windows(pred), _windows(truth)
    if p.shape[1] < 2:
        raise ShapeError("fluctuation_index needs a horizon of at least 2 steps")
    tv_p = total_variation(p, axis=1)
    tv_t = total_variation(t, axis=1)
    ok = tv_t > 0
    if not ok.any():
        raise DegenerateError("fluctuation_index undefined: every target window is flat")
    return float(np.mean(tv_p[ok] / tv_t[ok]))


def peak_amplitude_ratio(pred, truth, quantile: float = 0.95) -> float:
    """Mean |pred| over mean |truth| at the points where |truth| reaches its quantile.

    Below 1 means the forecast undershoots the peaks.
    """
    if not 0 < quantile < 1:
        raise ValueError("quantile must lie in (0, 1)")
    pred, truth = _pair(pred, truth)
    mag = np.abs(truth)
    mask = mag >= np.quantile(mag, quantile)
    denom = mag[mask].mean() if mask.any() else 0.0
    if denom == 0:
        raise DegenerateError("peak_amplitude_ratio undefined: no nonzero peak points")
    return float(np.abs(pred[mask]).mean() / denom)


@dataclass
class MetricReport:
    mse: float
    mae: float
    rse: float | None
    corr: float | None
    fluctuation_index: float | None
    peak_amplitude_ratio: float | None
    n_samples: int

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @property
    def over_fluctuating(self) -> bool:
        return self.fluctuation_index is not None and self.fluctuation_index > OVER_FLUCTUATION_THRESHOLD


def _maybe(fn, *args):
    try:
        return fn(*args)
    except (DegenerateError, ShapeError) as exc:
        log.warning("%s: %s", fn.__name__, exc)
        return None


def evaluate(pred, truth) -> MetricReport:
    """Full report for a batch of forecasts ``(windows, horizon, channels)``.

    Metrics that are undefined for the inputs are reported as ``None``.
    """
    pred, truth = _pair(pred, truth)
    multi_step = _windows(pred).shape[1] >= 2
    return MetricReport(
        mse=mse(pred, truth),
        mae=mae(pred, truth),
        rse=_maybe(rse, pred, truth),
        corr=_maybe(corr, pred, truth),
        fluctuation_index=_maybe(fluctuation_index, pred, truth) if multi_step else None,
        peak_amplitude_ratio=_maybe(peak_amplitude_ratio, pred, truth),
        n_samples=int(_windows(pred).shape[0]),
    )
