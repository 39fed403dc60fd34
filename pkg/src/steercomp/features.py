"""Feature analysis: PCA ranking, dead-time scan, straight/curve error split."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    ContractError,
    DataError,
    DegenerateSpectrumError,
    InsufficientDataError,
    SchemaError,
)
from .telemetry import COLUMN_INDEX, TelemetryLog

# every scalar feature a log can supply (time excluded)
CANDIDATE_FEATURES = tuple(name for name in COLUMN_INDEX if name != "t")
DEFAULT_FEATURES = ("steer_cmd", "steer_torque", "vel_x")

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    names: tuple[str, ...]
    data: np.ndarray
    means: np.ndarray | None = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2 or data.shape[1] != len(self.names):
            raise ContractError("feature matrix shape does not match its names")
        if data.shape[0] < 2 or data.shape[1] < 1:
            raise InsufficientDataError("feature matrix needs m >= 2 rows and n >= 1 columns")
        if not np.all(np.isfinite(data)):
            raise DataError("feature matrix contains non-finite entries")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "names", tuple(self.names))


@dataclass(frozen=True, eq=False)
class PcaResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    contribution_rates: np.ndarray
    feature_scores: np.ndarray
    selected: tuple[int, ...]
    names: tuple[str, ...] | None = None

    def selected_names(self):
        if self.names is None:
            return None
        return tuple(self.names[i] for i in self.selected)


@dataclass(frozen=True)
class DelayScan:
    shifts: tuple[float, ...]
    rmse_at_shift: tuple[float, ...]
    best_shift: float
    best_rmse: float
    rmse_at_zero: float

    @property
    def ratio(self) -> float:
        """Best-shift RMSE as a fraction of the zero-shift RMSE."""
        return self.best_rmse / self.rmse_at_zero if self.rmse_at_zero > 0 else 0.0


class SegmentRmse(NamedTuple):
    """Per-partition RMSE; ``None`` marks an empty partition."""

    straight: float | None
    curve: float | None
    total: float
    count_straight: int
    count_curve: int


def build_feature_matrix(log: TelemetryLog, feature_names: Sequence[str]) -> FeatureMatrix:
    for name in feature_names:
        if name not in CANDIDATE_FEATURES:
            raise SchemaError(f"unknown feature {name!r}")
    if len(log) < 2:
        raise InsufficientDataError("need at least 2 frames to build a feature matrix")
    cols = [log.column(name) for name in feature_names]
    data = np.column_stack(cols) if cols else np.empty((len(log), 0))
    if not np.all(np.isfinite(data)):
        bad = [n for n, c in zip(feature_names, cols) if not np.all(np.isfinite(c))]
        raise DataError(f"feature(s) with missing values: {', '.join(bad)}")
    return FeatureMatrix(tuple(feature_names), data)


def center_and_covariance(fm: FeatureMatrix):
    """Subtract column means; return the centered matrix and its 1/(m-1) covariance."""
    m = fm.data.shape[0]
    if m < 2:
        raise InsufficientDataError("covariance needs at least 2 samples")
    means = fm.data.mean(axis=0)
    centered = fm.data - means
    cov = centered.T @ centered / (m - 1)
    cov = 0.5 * (cov + cov.T)
    return FeatureMatrix(fm.names, centered, means), cov


def jacobi_eigh(a, tol=JACOBI_TOL, max_sweeps=JACOBI_MAX_SWEEPS):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(eigenvalues, eigenvectors)`` unsorted; column ``i`` of the
    eigenvector matrix pairs with ``eigenvalues[i]``.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return np.zeros(n), v
    for _ in range(max_sweeps):
        off = np.linalg.norm(a[~np.eye(n, dtype=bool)])
        if off < tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-18 * scale:
                    # negligible against the convergence tolerance
                    a[p, q] = a[q, p] = 0.0
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                # A <- J^T A J, rotation in the (p, q) plane
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    return np.diag(a).copy(), v


def contribution_rates(eigenvalues) -> np.ndarray:
    lam = np.asarray(eigenvalues, dtype=float)
    total = lam.sum()
    if not total > 0:
        raise DegenerateSpectrumError("eigenvalue sum is zero")
    return lam / total


def pca(cov, top_k: int = 3, names: Sequence[str] | None = None) -> PcaResult:
    """Decompose ``cov`` and rank the original features.

    Each feature is scored by the contribution-weighted squared loadings
    ``sum_k Cr_k * v_ik**2``; ``selected`` holds the ``top_k`` best indices.
    """
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ContractError("covariance must be a square matrix")
    n = cov.shape[0]
    if not np.all(np.abs(cov - cov.T) <= 1e-9):
        raise ContractError("covariance matrix is not symmetric")
    if not 1 <= top_k <= n:
        raise ContractError(f"top_k must lie in [1, {n}], got {top_k}")
    if names is not None and len(names) != n:
        raise ContractError("names length does not match covariance size")
    if not np.any(cov):
        raise DegenerateSpectrumError("covariance matrix is all zeros")
    lam, vec = jacobi_eigh(cov)
    order = np.argsort(-lam, kind="stable")
    lam = lam[order]
    vec = vec[:, order]
    lam = np.where((lam < 0) & (lam >= -1e-9 * max(1.0, abs(lam[0]))), 0.0, lam)
    rates = contribution_rates(lam)
    scores = (vec**2) @ rates
    selected = tuple(int(i) for i in np.argsort(-scores, kind="stable")[:top_k])
    return PcaResult(lam, vec, rates, scores, selected, tuple(names) if names else None)


def _shift_samples(step: float, sample_period: float) -> int:
    ratio = step / sample_period
    k = round(ratio)
    if k < 1 or abs(ratio - k) > 1e-6:
        raise ContractError(
            f"step {step} s is not a positive integer multiple of the sample period {sample_period} s"
        )
    return k


def estimate_delay(cmd, meas, max_shift: float, step: float, sample_period: float) -> DelayScan:
    """Shift the command right by each candidate delay and measure the RMSE.

    Only the overlapping window is compared (no padding).
    """
    cmd = np.asarray(cmd, dtype=float).ravel()
    meas = np.asarray(meas, dtype=float).ravel()
    if cmd.shape != meas.shape:
        raise ContractError("command and measurement series differ in length")
    k_step = _shift_samples(step, sample_period)
    max_k = int(math.floor(max_shift / sample_period + 1e-9))
    if max_shift < 0:
        raise ContractError("max_shift must be non-negative")
    if cmd.size < max(2, 2 * max_k):
        raise InsufficientDataError(
            f"need at least {max(2, 2 * max_k)} samples to scan to {max_shift} s"
        )
    ks = list(range(0, max_k + 1, k_step))
    n = cmd.size
    errs = [float(np.sqrt(np.mean((cmd[: n - k] - meas[k:]) ** 2))) for k in ks]
    best = int(np.argmin(errs))
    return DelayScan(
        shifts=tuple(k * sample_period for k in ks),
        rmse_at_shift=tuple(errs),
        best_shift=ks[best] * sample_period,
        best_rmse=errs[best],
        rmse_at_zero=errs[0],
    )


def segment_rmse(cmd, meas, angle_threshold: float = 0.2) -> SegmentRmse:
    """Split samples into straight (|cmd| <= threshold) and curve and score each."""
    cmd = np.asarray(cmd, dtype=float).ravel()
    meas = np.asarray(meas, dtype=float).ravel()
    if cmd.shape != meas.shape:
        raise ContractError("command and measurement series differ in length")
    if cmd.size < 1:
        raise InsufficientDataError("segment_rmse needs at least one sample")
    if not angle_threshold > 0:
        raise ContractError("angle_threshold must be positive")
    sq = (cmd - meas) ** 2
    curve = np.abs(cmd) > angle_threshold

    def part(mask):
        return float(np.sqrt(np.mean(sq[mask]))) if np.any(mask) else None

    return SegmentRmse(
        straight=part(~curve),
        curve=part(curve),
        total=float(np.sqrt(np.mean(sq))),
        count_straight=int(np.count_nonzero(~curve)),
        count_curve=int(np.count_nonzero(curve)),
    )
