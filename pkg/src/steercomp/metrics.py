"""Scalar evaluation metrics for predictors and closed-loop runs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, InsufficientDataError, UndefinedMetricError


def _pair(a, b, min_len=1):
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise ContractError(f"length mismatch: {a.size} vs {b.size}")
    if a.size < min_len:
        raise InsufficientDataError(f"need at least {min_len} samples, got {a.size}")
    return a, b


def rmse(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def cc(measured, predicted) -> float:
    """Pearson correlation between measured and predicted series."""
    h_get, h_pre = _pair(measured, predicted, min_len=2)
    dg = h_get - h_get.mean()
    dp = h_pre - h_pre.mean()
    denom = np.sqrt(np.sum(dp * dp)) * np.sqrt(np.sum(dg * dg))
    if denom == 0.0:
        raise UndefinedMetricError("correlation undefined for a constant series")
    return float(np.clip(np.sum(dg * dp) / denom, -1.0, 1.0))


def ce(measured, predicted) -> float:
    """Coefficient of efficiency (Nash-Sutcliffe)."""
    h_get, h_pre = _pair(measured, predicted, min_len=2)
    spread = np.sum((h_get - h_get.mean()) ** 2)
    if spread == 0.0:
        raise UndefinedMetricError("coefficient of efficiency undefined for constant measurements")
    return float(1.0 - np.sum((h_pre - h_get) ** 2) / spread)


def oscillation_index(theta) -> float:
    """RMS of the first difference of the steering-wheel angle."""
    theta = np.asarray(theta, dtype=float).ravel()
    if theta.size < 2:
        raise InsufficientDataError("oscillation index needs at least 2 samples")
    return float(np.sqrt(np.mean(np.diff(theta) ** 2)))


def diff_sign_changes(theta) -> int:
    """Zero crossings of the first difference, a secondary chatter count."""
    d = np.diff(np.asarray(theta, dtype=float).ravel())
    s = np.sign(d[d != 0.0])
    return int(np.count_nonzero(s[1:] != s[:-1]))


@dataclass(frozen=True)
class MetricsReport:
    max_tracking_error: float
    oscillation_index: float
    rmse: float
    sample_count: int
    steer_reversals: int
    cc: float | None = None
    ce: float | None = None

    def as_dict(self) -> dict:
        return {
            "max_tracking_error": self.max_tracking_error,
            "oscillation_index": self.oscillation_index,
            "rmse": self.rmse,
            "sample_count": self.sample_count,
            "steer_reversals": self.steer_reversals,
        }


def tracking_metrics(log) -> MetricsReport:
    """Path-tracking summary of a closed-loop run (anything with ``column()``)."""
    return series_metrics(log.column("lateral_error"), log.column("steer_meas"))


def series_metrics(lateral_error, theta) -> MetricsReport:
    """``rmse`` here is the RMS lateral error in metres."""
    lateral_error = np.asarray(lateral_error, dtype=float).ravel()
    theta = np.asarray(theta, dtype=float).ravel()
    if lateral_error.size < 2 or theta.size < 2:
        raise InsufficientDataError("tracking metrics need at least 2 samples")
    return MetricsReport(
        max_tracking_error=float(np.max(np.abs(lateral_error))),
        oscillation_index=oscillation_index(theta),
        rmse=float(np.sqrt(np.mean(lateral_error**2))),
        sample_count=int(lateral_error.size),
        steer_reversals=diff_sign_changes(theta),
    )


def improvement(baseline: float, optimized: float) -> float:
    """Relative improvement ``(A - B) / A``; 0 when both are 0."""
    if baseline == 0.0:
        if optimized == 0.0:
            return 0.0
        raise UndefinedMetricError("improvement undefined for a zero baseline")
    return (baseline - optimized) / baseline
