"""Sampled sensor frames and their CSV representation.

A log is stored column-wise as an ``(N, 18)`` float array whose columns follow
:data:`COLUMNS`.  A missing ``turning_radius`` is stored as NaN
(:data:`MISSING`); every other cell must be finite.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ContractError, DataError, InsufficientDataError, SchemaError

COLUMNS = (
    "t",
    "steer_cmd",
    "steer_meas",
    "steer_torque",
    "vel_x",
    "vel_y",
    "vel_z",
    "ang_vel_x",
    "ang_vel_y",
    "ang_vel_z",
    "acc_x",
    "acc_y",
    "acc_z",
    "wheel_speed_fl",
    "wheel_speed_fr",
    "wheel_speed_rl",
    "wheel_speed_rr",
    "turning_radius",
)
COLUMN_INDEX = {name: i for i, name in enumerate(COLUMNS)}
OPTIONAL_COLUMNS = frozenset({"turning_radius"})
# columns that may arrive in degrees (or deg/s) under a `<name>_deg` header
ANGULAR_COLUMNS = frozenset(
    {"steer_cmd", "steer_meas", "ang_vel_x", "ang_vel_y", "ang_vel_z"}
)

MISSING = math.nan
DEFAULT_SAMPLE_PERIOD = 0.05
GRID_TOL = 1e-6


@dataclass(frozen=True)
class TelemetryFrame:
    t: float
    steer_cmd: float
    steer_meas: float
    steer_torque: float
    vel_x: float
    vel_y: float
    vel_z: float
    ang_vel_x: float
    ang_vel_y: float
    ang_vel_z: float
    acc_x: float
    acc_y: float
    acc_z: float
    wheel_speed_fl: float
    wheel_speed_fr: float
    wheel_speed_rl: float
    wheel_speed_rr: float
    turning_radius: float = MISSING

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, f.name) for f in fields(self))


def _check_row_values(row: np.ndarray, where: str) -> None:
    for j, name in enumerate(COLUMNS):
        v = row[j]
        if name in OPTIONAL_COLUMNS and math.isnan(v):
            continue
        if not math.isfinite(v):
            raise DataError(f"non-finite value in column {name!r} at {where}")
    if row[0] < 0:
        raise DataError(f"negative timestamp at {where}")


@dataclass(frozen=True, eq=False)
class TelemetryLog:
    """Uniformly sampled telemetry; ``data`` columns follow :data:`COLUMNS`."""

    sample_period: float
    data: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=float, copy=True)
        if data.ndim != 2 or data.shape[1] != len(COLUMNS):
            raise ContractError(
                f"telemetry data must have shape (N, {len(COLUMNS)}), got {data.shape}"
            )
        if not self.sample_period > 0:
            raise ContractError("sample_period must be positive")
        for i, row in enumerate(data):
            _check_row_values(row, f"frame {i}")
        if len(data) > 1:
            dt = np.diff(data[:, 0])
            if np.any(dt <= 0):
                bad = int(np.argmax(dt <= 0)) + 1
                raise DataError(f"timestamps not strictly increasing at frame {bad}")
            if np.any(np.abs(dt - self.sample_period) > GRID_TOL):
                raise DataError("frames are not on a uniform sample_period grid")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def from_frames(cls, frames: Iterable[TelemetryFrame], sample_period=DEFAULT_SAMPLE_PERIOD):
        rows = [f.as_tuple() for f in frames]
        return cls(sample_period, np.array(rows, dtype=float).reshape(-1, len(COLUMNS)))

    @classmethod
    def from_columns(cls, sample_period: float, **columns) -> "TelemetryLog":
        """Build a log from named 1-D arrays; unnamed columns are zero, radius missing."""
        unknown = set(columns) - set(COLUMNS)
        if unknown:
            raise SchemaError(f"unknown column(s): {', '.join(sorted(unknown))}")
        if "t" not in columns:
            raise SchemaError("t")
        n = len(columns["t"])
        data = np.zeros((n, len(COLUMNS)))
        data[:, COLUMN_INDEX["turning_radius"]] = MISSING
        for name, values in columns.items():
            data[:, COLUMN_INDEX[name]] = values
        return cls(sample_period, data)

    def __len__(self) -> int:
        return len(self.data)

    @property
    def t(self) -> np.ndarray:
        return self.data[:, 0]

    def column(self, name: str) -> np.ndarray:
        try:
            return self.data[:, COLUMN_INDEX[name]]
        except KeyError:
            raise SchemaError(f"unknown telemetry column {name!r}") from None

    def frame(self, i: int) -> TelemetryFrame:
        return TelemetryFrame(*(float(v) for v in self.data[i]))

    @property
    def frames(self) -> tuple[TelemetryFrame, ...]:
        return tuple(self.frame(i) for i in range(len(self)))


def resample(times: np.ndarray, values: np.ndarray, sample_period: float):
    """Linearly interpolate rows onto a grid anchored at ``times[0]``.

    No extrapolation: the grid stops at the last recorded time.  When the
    input is already on the grid it is returned unchanged.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    dt = np.diff(times)
    if np.all(np.abs(dt - sample_period) <= GRID_TOL):
        return times.copy(), values.copy()
    count = int(math.floor((times[-1] - times[0]) / sample_period + 1e-9)) + 1
    grid = times[0] + sample_period * np.arange(count)
    grid[-1] = min(grid[-1], times[-1])
    out = np.empty((count, values.shape[1]))
    for j in range(values.shape[1]):
        out[:, j] = np.interp(grid, times, values[:, j])
    return grid, out


def _parse_header(header: Sequence[str]):
    """Map each canonical column to (csv index, degree flag)."""
    names = [h.strip() for h in header]
    where = {}
    for i, name in enumerate(names):
        if name in COLUMN_INDEX:
            where[name] = (i, False)
        elif name.endswith("_deg") and name[:-4] in ANGULAR_COLUMNS:
            where.setdefault(name[:-4], (i, True))
    for name in COLUMNS:
        if name not in where and name not in OPTIONAL_COLUMNS:
            raise SchemaError(f"missing required column {name!r}")
    return where


def ingest_csv(path, sample_period: float = DEFAULT_SAMPLE_PERIOD) -> TelemetryLog:
    """Read a telemetry CSV, convert degree columns, resample to ``sample_period``."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, no header") from None
        where = _parse_header(header)
        rows = []
        for rowno, cells in enumerate(reader, start=1):
            if not cells or all(not c.strip() for c in cells):
                continue
            row = np.empty(len(COLUMNS))
            for j, name in enumerate(COLUMNS):
                if name not in where:
                    row[j] = MISSING
                    continue
                idx, in_degrees = where[name]
                cell = cells[idx].strip() if idx < len(cells) else ""
                if cell == "" and name in OPTIONAL_COLUMNS:
                    row[j] = MISSING
                    continue
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}: unparseable value {cell!r} at row {rowno}, column {name!r}"
                    ) from None
                row[j] = math.radians(v) if in_degrees else v
            _check_row_values(row, f"row {rowno}")
            if rows and not row[0] > rows[-1][0]:
                raise DataError(f"{path}: non-monotone timestamp at row {rowno}")
            rows.append(row)
    if len(rows) < 2:
        raise InsufficientDataError(f"{path}: need at least 2 data rows, got {len(rows)}")
    raw = np.vstack(rows)
    grid, values = resample(raw[:, 0], raw[:, 1:], sample_period)
    if len(grid) < 2:
        raise InsufficientDataError(f"{path}: recorded span shorter than one sample period")
    return TelemetryLog(sample_period, np.column_stack([grid, values]))


def format_value(v: float) -> str:
    if math.isnan(v):
        return ""
    return repr(float(v))


def write_rows(path, header: Sequence[str], rows: Iterable[Sequence[str]]) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def export_csv(log: TelemetryLog, path) -> None:
    """Write ``log`` with the canonical header; values round-trip exactly."""
    if len(log) == 0:
        raise ContractError("cannot export an empty log")
    write_rows(path, COLUMNS, ([format_value(v) for v in row] for row in log.data))
