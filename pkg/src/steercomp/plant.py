"""Closed-loop steering simulation.

Kinematic bicycle (rear-axle reference) driven through a steering actuator
with transport delay and a Gaussian disturbance, steered by pure pursuit on a
reference path, optionally corrected by the learned feedforward compensator.
Speed is held ideally at the configured value.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

from . import predictor as tdnn
from .compensator import CompensatorGains, CompensatorState, Mode, compensate, compensator_step
from .errors import ConfigurationError, ContractError
from .features import DEFAULT_FEATURES, estimate_delay
from .telemetry import COLUMN_INDEX, COLUMNS, MISSING, TelemetryLog, format_value, write_rows

MAX_WHEEL_ANGLE = 0.4
WAYPOINT_SPACING = 0.2
DLC_LAYOUT = (15.0, 30.0, 25.0, 25.0, 15.0)
WHEEL_RADIUS = 0.35
TRACK_WIDTH = 1.6
SENSOR_NOISE_STD = 0.01
# calibrated by scripts/calibrate_noise.py: best-shift / zero-shift RMSE = w2
DEFAULT_NOISE_STD = 0.0393


@dataclass(frozen=True)
class VehicleState:
    x: float = 0.0
    y: float = 0.0
    heading: float = 0.0
    speed: float = 30.0 / 3.6
    yaw_rate: float = 0.0
    front_wheel_angle: float = 0.0
    steer_wheel_meas: float = 0.0


def bicycle_step(state: VehicleState, delta_f: float, v: float, T: float, L: float) -> VehicleState:
    """Explicit-Euler kinematic bicycle update."""
    if not T > 0:
        raise ContractError("T must be positive")
    if abs(delta_f) > MAX_WHEEL_ANGLE + 1e-12:
        raise ContractError(f"|delta_f| = {abs(delta_f):.4f} exceeds {MAX_WHEEL_ANGLE} rad")
    yaw_rate = v * math.tan(delta_f) / L
    return replace(
        state,
        x=state.x + v * math.cos(state.heading) * T,
        y=state.y + v * math.sin(state.heading) * T,
        heading=state.heading + yaw_rate * T,
        speed=v,
        yaw_rate=yaw_rate,
        front_wheel_angle=delta_f,
    )


# --- reference paths -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PathSpec:
    x: np.ndarray
    y: np.ndarray
    s: np.ndarray
    lane_offset: float = 0.0
    layout: tuple[float, ...] = ()

    def __post_init__(self):
        if len(self.x) < 2:
            raise ContractError("a path needs at least two waypoints")
        if np.any(np.diff(self.s) <= 0):
            raise ContractError("path arc length must be strictly increasing")
        if np.max(np.diff(self.s)) > 1.0 + 1e-9:
            raise ContractError("waypoint spacing must not exceed 1 m")

    @classmethod
    def from_points(cls, x, y, **kw) -> "PathSpec":
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        s = np.concatenate([[0.0], np.cumsum(np.hypot(np.diff(x), np.diff(y)))])
        return cls(x, y, s, **kw)

    @property
    def total_length(self) -> float:
        return float(self.s[-1])

    @property
    def heading(self) -> np.ndarray:
        """Tangent direction of each segment (one fewer than waypoints)."""
        return np.arctan2(np.diff(self.y), np.diff(self.x))

    def fingerprint(self) -> str:
        import hashlib

        h = hashlib.sha256(np.stack([self.x, self.y]).tobytes())
        return h.hexdigest()[:16]

    def point_at(self, s: float) -> tuple[float, float]:
        """Point at arc length ``s``; beyond either end the end tangent is extended."""
        if s >= self.s[-1]:
            hx, hy = self.x[-1] - self.x[-2], self.y[-1] - self.y[-2]
            d = (s - self.s[-1]) / math.hypot(hx, hy)
            return float(self.x[-1] + d * hx), float(self.y[-1] + d * hy)
        if s <= 0.0:
            hx, hy = self.x[1] - self.x[0], self.y[1] - self.y[0]
            d = s / math.hypot(hx, hy)
            return float(self.x[0] + d * hx), float(self.y[0] + d * hy)
        return float(np.interp(s, self.s, self.x)), float(np.interp(s, self.s, self.y))

    def project(self, px: float, py: float, hint: int | None = None, window: int = 50):
        """Closest point on the polyline: ``(s, signed lateral offset, segment index)``.

        Positive offset means the point lies left of the path tangent.  With a
        ``hint`` only segments near it are searched, so paths that pass close
        to themselves do not make the projection jump.
        """
        nseg = len(self.x) - 1
        lo, hi = (0, nseg) if hint is None else (max(0, hint - window), min(nseg, hint + window))
        x0, y0 = self.x[lo:hi], self.y[lo:hi]
        dx, dy = self.x[lo + 1 : hi + 1] - x0, self.y[lo + 1 : hi + 1] - y0
        seg2 = dx * dx + dy * dy
        r = np.clip(((px - x0) * dx + (py - y0) * dy) / seg2, 0.0, 1.0)
        cx, cy = x0 + r * dx, y0 + r * dy
        d2 = (px - cx) ** 2 + (py - cy) ** 2
        k = int(np.argmin(d2))
        i = lo + k
        seg_len = math.sqrt(seg2[k])
        cross = dx[k] * (py - y0[k]) - dy[k] * (px - x0[k])
        s = float(self.s[i] + r[k] * seg_len)
        # past either end: measure along the extended end tangent
        if i == nseg - 1 and r[k] >= 1.0:
            s = float(self.s[-1] + ((px - self.x[-1]) * dx[k] + (py - self.y[-1]) * dy[k]) / seg_len)
        return s, float(cross / seg_len), i


def straight_path(length: float, spacing: float = WAYPOINT_SPACING) -> PathSpec:
    n = max(2, int(math.ceil(length / spacing)) + 1)
    x = np.linspace(0.0, length, n)
    return PathSpec.from_points(x, np.zeros(n))


def double_lane_change_path(total_length: float = 200.0, lane_offset: float = 3.5,
                            layout: Sequence[float] = DLC_LAYOUT,
                            spacing: float = WAYPOINT_SPACING) -> PathSpec:
    """Entry straight, half-cosine shift to ``lane_offset``, parallel lane,
    half-cosine return, exit straight.  Track length left over after the five
    sections extends the exit straight.
    """
    layout = tuple(float(v) for v in layout)
    if len(layout) != 5 or min(layout) <= 0:
        raise ContractError("layout must be five positive section lengths")
    if sum(layout) > total_length + 1e-9:
        raise ContractError("section lengths exceed the total path length")
    if lane_offset < 0:
        raise ContractError("lane_offset must be non-negative")
    entry, shift, lane, back, _exit = layout
    x1 = entry
    x2 = x1 + shift
    x3 = x2 + lane
    x4 = x3 + back
    n = int(math.ceil(total_length / spacing)) + 1
    x = np.linspace(0.0, total_length, n)
    y = np.zeros(n)
    up = (x > x1) & (x < x2)
    y[up] = 0.5 * lane_offset * (1.0 - np.cos(math.pi * (x[up] - x1) / shift))
    y[(x >= x2) & (x <= x3)] = lane_offset
    down = (x > x3) & (x < x4)
    y[down] = 0.5 * lane_offset * (1.0 + np.cos(math.pi * (x[down] - x3) / back))
    return PathSpec.from_points(x, y, lane_offset=lane_offset, layout=layout)


def path_from_segments(segments: Sequence[tuple], spacing: float = WAYPOINT_SPACING) -> PathSpec:
    """Chain ``("straight", length)`` and ``("arc", radius, angle)`` pieces.

    Positive arc angles turn left.  Arcs are placed in closed form, so the
    polyline is tangent-continuous up to the waypoint spacing.
    """
    xs, ys = [0.0], [0.0]
    hdg = 0.0
    for seg in segments:
        kind = seg[0]
        if kind == "straight":
            length = float(seg[1])
            n = max(1, int(math.ceil(length / spacing)))
            d = np.arange(1, n + 1) * (length / n)
            xs.extend(xs[-1] + d * math.cos(hdg))
            ys.extend(ys[-1] + d * math.sin(hdg))
        elif kind == "arc":
            radius, angle = float(seg[1]), float(seg[2])
            n = max(1, int(math.ceil(radius * abs(angle) / spacing)))
            sign = math.copysign(1.0, angle)
            cx = xs[-1] - sign * radius * math.sin(hdg)
            cy = ys[-1] + sign * radius * math.cos(hdg)
            phis = hdg + np.arange(1, n + 1) * (angle / n)
            xs.extend(cx + sign * radius * np.sin(phis))
            ys.extend(cy - sign * radius * np.cos(phis))
            hdg += angle
        else:
            raise ContractError(f"unknown path segment kind {kind!r}")
    return PathSpec.from_points(np.array(xs), np.array(ys))


def u_turn_path(radius: float = 12.0, lead: float = 20.0, tail: float = 30.0) -> PathSpec:
    return path_from_segments([("straight", lead), ("arc", radius, math.pi), ("straight", tail)])


# --- path-tracking command -------------------------------------------------------


class PtcCommand(NamedTuple):
    v_d: float
    w_d: float
    u_cmd: float
    s: float
    lateral_error: float
    ref_x: float
    ref_y: float
    segment: int
    done: bool


def ptc_command(state: VehicleState, path: PathSpec, lookahead: float, wheelbase: float,
                steering_ratio: float, speed: float | None = None, hint: int | None = None) -> PtcCommand:
    """Pure pursuit from the rear axle toward the point ``lookahead`` metres ahead.

    Curvature is ``2 sin(alpha) / d`` with ``d`` the straight-line distance to
    the target; on an exact circle this returns ``1/R``.
    """
    if not lookahead > 0:
        raise ContractError("lookahead must be positive")
    v = state.speed if speed is None else speed
    s, lat, seg = path.project(state.x, state.y, hint)
    rx, ry = path.point_at(s)
    tx, ty = path.point_at(s + lookahead)
    dx, dy = tx - state.x, ty - state.y
    dist = math.hypot(dx, dy)
    alpha = math.atan2(dy, dx) - state.heading
    kappa = 2.0 * math.sin(alpha) / dist if dist > 0 else 0.0
    delta = max(-MAX_WHEEL_ANGLE, min(MAX_WHEEL_ANGLE, math.atan(wheelbase * kappa)))
    return PtcCommand(
        v_d=v,
        w_d=v * kappa,
        u_cmd=steering_ratio * delta,
        s=s,
        lateral_error=lat,
        ref_x=rx,
        ref_y=ry,
        segment=seg,
        done=s >= path.total_length,
    )


# --- actuator --------------------------------------------------------------------


class ActuatorModel:
    """Steering-wheel actuator: FIFO transport delay plus Gaussian disturbance."""

    def __init__(self, delay_steps: int = 4, noise_std: float = DEFAULT_NOISE_STD,
                 w1: float = 0.713, w2: float = 0.287, rng_seed: int = 0,
                 steering_ratio: float = 14.8, initial: float = 0.0):
        if delay_steps < 0:
            raise ContractError("delay_steps must be >= 0")
        if noise_std < 0:
            raise ContractError("noise_std must be >= 0")
        if abs(w1 + w2 - 1.0) > 1e-9:
            raise ContractError("w1 + w2 must equal 1")
        self.delay_steps = int(delay_steps)
        self.noise_std = float(noise_std)
        self.w1, self.w2 = float(w1), float(w2)
        self.rng_seed = int(rng_seed)
        self.limit = steering_ratio * MAX_WHEEL_ANGLE
        self.rng = np.random.Generator(np.random.PCG64(self.rng_seed))
        self.cmd_buffer = deque([float(initial)] * self.delay_steps)

    def step(self, u: float) -> float:
        if not math.isfinite(u):
            raise ContractError("actuator command must be finite")
        self.cmd_buffer.append(float(u))
        applied = self.cmd_buffer.popleft()
        noise = self.rng.normal(0.0, self.noise_std) if self.noise_std > 0 else 0.0
        return max(-self.limit, min(self.limit, applied + noise))


def actuator_step(model: ActuatorModel, u: float) -> float:
    return model.step(u)


def calibration_ratio(noise_std: float, delay_steps: int = 4, T: float = 0.05,
                      steps: int = 10_000, seed: int = 0, amplitude: float = 0.3,
                      freq: float = 0.5) -> float:
    """Best-shift / zero-shift RMSE of the actuator on a sine calibration run."""
    act = ActuatorModel(delay_steps, noise_std, rng_seed=seed)
    t = np.arange(steps) * T
    u = amplitude * np.sin(2.0 * math.pi * freq * t)
    theta = np.array([act.step(v) for v in u])
    scan = estimate_delay(u, theta, max_shift=2 * delay_steps * T, step=T, sample_period=T)
    return scan.ratio


def calibrate_noise_std(target_ratio: float = 0.287, delay_steps: int = 4, T: float = 0.05,
                        steps: int = 10_000, seed: int = 0, tol: float = 1e-4) -> float:
    """Bisect the disturbance std so the calibration run splits the error as w1:w2."""
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if calibration_ratio(mid, delay_steps, T, steps, seed) < target_ratio:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# --- scenario ------------------------------------------------------------------


@dataclass(frozen=True)
class ScenarioConfig:
    sample_period: float = 0.05
    duration: float = 60.0
    wheelbase: float = 2.85
    steering_ratio: float = 14.8
    lookahead: float = 3.6
    speed: float = 30.0 / 3.6
    initial_x: float = 0.0
    initial_y: float = 0.0
    initial_heading: float = 0.0
    # path
    total_length: float = 200.0
    lane_offset: float = 3.5
    layout: tuple[float, ...] = DLC_LAYOUT
    # actuator
    delay_steps: int = 4
    noise_std: float = DEFAULT_NOISE_STD
    w1: float = 0.713
    w2: float = 0.287
    # compensator
    gains: CompensatorGains = field(default_factory=CompensatorGains)
    compensator_enabled: bool = False
    model_path: str | None = None
    features: tuple[str, ...] = DEFAULT_FEATURES
    taps: int = 5
    horizon_steps: int = 4
    seed: int = 0

    def __post_init__(self):
        if not self.sample_period > 0:
            raise ContractError("sample_period must be positive")
        if not self.wheelbase > 0 or not self.steering_ratio > 0:
            raise ContractError("wheelbase and steering_ratio must be positive")
        if not self.lookahead > 0:
            raise ContractError("lookahead must be positive")
        object.__setattr__(self, "layout", tuple(float(v) for v in self.layout))
        object.__setattr__(self, "features", tuple(self.features))

    @property
    def actuator_limit(self) -> float:
        return self.steering_ratio * MAX_WHEEL_ANGLE

    def initial_state(self) -> VehicleState:
        return VehicleState(self.initial_x, self.initial_y, self.initial_heading, self.speed)

    def path(self) -> PathSpec:
        return double_lane_change_path(self.total_length, self.lane_offset, self.layout)


# --- logs -----------------------------------------------------------------------

EXTRA_COLUMNS = (
    "lateral_error", "u_cmd", "u1", "u", "mode", "e_hat",
    "x", "y", "heading", "ref_x", "ref_y", "w_d", "integrator", "saturated",
)
SIMLOG_COLUMNS = COLUMNS + EXTRA_COLUMNS


@dataclass(frozen=True, eq=False)
class SimLog:
    telemetry: TelemetryLog
    extras: dict
    modes: tuple[str, ...]
    completed: bool = False
    path_fingerprint: str = ""

    def __len__(self):
        return len(self.telemetry)

    def column(self, name: str) -> np.ndarray:
        if name == "mode":
            return np.array(self.modes)
        if name in self.extras:
            return self.extras[name]
        return self.telemetry.column(name)

    def rows(self):
        extra = [self.extras[c] for c in EXTRA_COLUMNS if c != "mode"]
        for i, trow in enumerate(self.telemetry.data):
            cells = [format_value(v) for v in trow]
            vals = iter(col[i] for col in extra)
            for c in EXTRA_COLUMNS:
                cells.append(self.modes[i] if c == "mode" else format_value(next(vals)))
            yield cells


def export_simlog(log: SimLog, path) -> None:
    write_rows(path, SIMLOG_COLUMNS, log.rows())


def read_simlog(path, sample_period: float = 0.05) -> SimLog:
    """Load an exported SimLog CSV (no resampling; the grid is already uniform)."""
    import csv

    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in ("lateral_error", "steer_meas", "mode") if c not in (reader.fieldnames or [])]
        if missing:
            raise ConfigurationError(f"{path}: not a simulation log (missing {', '.join(missing)})")
        records = list(reader)
    if not records:
        raise ConfigurationError(f"{path}: empty simulation log")

    def col(name):
        return np.array([float(r[name]) if r[name] != "" else MISSING for r in records])

    tel = np.column_stack([col(c) for c in COLUMNS])
    extras = {c: col(c) for c in EXTRA_COLUMNS if c != "mode" and c in records[0]}
    modes = tuple(r["mode"] for r in records)
    return SimLog(TelemetryLog(sample_period, tel), extras, modes)


class _Recorder:
    """Accumulates telemetry rows and per-step controller fields."""

    def __init__(self):
        self.rows = []
        self.extras = {c: [] for c in EXTRA_COLUMNS if c != "mode"}
        self.modes = []

    def add(self, row, mode, **extras):
        self.rows.append(row)
        self.modes.append(mode)
        for k, v in extras.items():
            self.extras[k].append(v)

    def telemetry(self, T):
        return TelemetryLog(T, np.array(self.rows).reshape(-1, len(COLUMNS)))

    def simlog(self, T, completed, fingerprint):
        extras = {k: np.array(v, dtype=float) for k, v in self.extras.items()}
        return SimLog(self.telemetry(T), extras, tuple(self.modes), completed, fingerprint)


def steering_torque(state: VehicleState) -> float:
    """Column torque: aligning moment from lateral acceleration plus centring."""
    return 0.6 * state.speed * state.yaw_rate + 0.5 * state.steer_wheel_meas


def telemetry_row(t, state: VehicleState, steer_cmd, steer_meas, prev_speed, T, rng) -> list:
    v, r = state.speed, state.yaw_rate
    half = 0.5 * TRACK_WIDTH * r
    vf = v / math.cos(state.front_wheel_angle)
    noise = rng.normal(0.0, SENSOR_NOISE_STD, size=5)
    row = [0.0] * len(COLUMNS)
    row[COLUMN_INDEX["t"]] = t
    row[COLUMN_INDEX["steer_cmd"]] = steer_cmd
    row[COLUMN_INDEX["steer_meas"]] = steer_meas
    row[COLUMN_INDEX["steer_torque"]] = steering_torque(state)
    row[COLUMN_INDEX["vel_x"]] = v
    row[COLUMN_INDEX["vel_y"]] = noise[0]
    row[COLUMN_INDEX["vel_z"]] = noise[1]
    row[COLUMN_INDEX["ang_vel_x"]] = noise[2]
    row[COLUMN_INDEX["ang_vel_y"]] = noise[3]
    row[COLUMN_INDEX["ang_vel_z"]] = r
    row[COLUMN_INDEX["acc_x"]] = (v - prev_speed) / T
    row[COLUMN_INDEX["acc_y"]] = v * r
    row[COLUMN_INDEX["acc_z"]] = noise[4]
    row[COLUMN_INDEX["wheel_speed_fl"]] = (vf - half) / WHEEL_RADIUS
    row[COLUMN_INDEX["wheel_speed_fr"]] = (vf + half) / WHEEL_RADIUS
    row[COLUMN_INDEX["wheel_speed_rl"]] = (v - half) / WHEEL_RADIUS
    row[COLUMN_INDEX["wheel_speed_rr"]] = (v + half) / WHEEL_RADIUS
    row[COLUMN_INDEX["turning_radius"]] = v / r if abs(r) > 1e-3 else MISSING
    return row


def _load_predictor(config: ScenarioConfig, predictor):
    if predictor is None:
        if config.model_path is None:
            raise ConfigurationError("compensator enabled but no model given")
        predictor = tdnn.load(config.model_path)
    mc = predictor.config
    if tuple(predictor.features) != tuple(config.features):
        raise ConfigurationError(
            f"model features {list(predictor.features)} != scenario features {list(config.features)}"
        )
    if mc.feature_count != len(config.features):
        raise ConfigurationError("model feature_count does not match the scenario")
    if mc.taps != config.taps:
        raise ConfigurationError(f"model taps {mc.taps} != scenario taps {config.taps}")
    if abs(mc.tap_spacing - config.sample_period) > 1e-9:
        raise ConfigurationError("model tap spacing differs from the scenario sample period")
    return predictor


def run_simulation(config: ScenarioConfig, predictor=None, path: PathSpec | None = None) -> SimLog:
    """Closed-loop run; stops when the path is completed or ``duration`` elapses."""
    T = config.sample_period
    path = path or config.path()
    if config.compensator_enabled:
        predictor = _load_predictor(config, predictor)
    else:
        predictor = None
    gains = replace(config.gains, sample_period=T)
    actuator = ActuatorModel(config.delay_steps, config.noise_std, config.w1, config.w2,
                             rng_seed=config.seed, steering_ratio=config.steering_ratio)
    sensor_rng = np.random.Generator(np.random.PCG64([config.seed, 1]))
    state = config.initial_state()
    comp = CompensatorState()
    rec = _Recorder()
    taps = config.taps
    window = deque(maxlen=taps)
    feat_idx = [COLUMN_INDEX[f] for f in config.features]
    hint = None
    steps = int(round(config.duration / T))
    prev_speed = state.speed
    completed = False
    for k in range(steps):
        cmd = ptc_command(state, path, config.lookahead, config.wheelbase,
                          config.steering_ratio, config.speed, hint)
        hint = cmd.segment
        if cmd.done:
            completed = True
            break
        row = telemetry_row(k * T, state, cmd.u_cmd, 0.0, prev_speed, T, sensor_rng)
        window.append([row[j] for j in feat_idx])
        e_hat = u1 = 0.0
        mode = Mode.PI if abs(cmd.w_d) <= gains.w0 else Mode.PD
        if predictor is not None:
            if len(window) == taps:
                e_hat = tdnn.predict(predictor, np.array(window)[::-1].ravel())
            u1, comp = compensator_step(comp, e_hat, cmd.w_d, gains)
            mode = comp.mode
        u, saturated = compensate(cmd.u_cmd, u1, config.actuator_limit)
        theta = actuator.step(u)
        row[COLUMN_INDEX["steer_meas"]] = theta
        rec.add(row, mode.value, lateral_error=cmd.lateral_error, u_cmd=cmd.u_cmd, u1=u1, u=u,
                e_hat=e_hat, x=state.x, y=state.y, heading=state.heading, ref_x=cmd.ref_x,
                ref_y=cmd.ref_y, w_d=cmd.w_d, integrator=comp.integrator, saturated=float(saturated))
        delta_f = max(-MAX_WHEEL_ANGLE, min(MAX_WHEEL_ANGLE, theta / config.steering_ratio))
        prev_speed = state.speed
        state = replace(bicycle_step(state, delta_f, config.speed, T, config.wheelbase),
                        steer_wheel_meas=theta)
    return rec.simlog(T, completed, path.fingerprint())


# --- training corpora --------------------------------------------------------------

EXCITATIONS = ("dlc", "u_turn", "chirp_steer", "mixed")
MIXED_SPEEDS = (30.0 / 3.6, 20.0 / 3.6, 25.0 / 3.6)


def chirp_signal(n: int, T: float, amplitude: float = 1.0, f0: float = 0.1, f1: float = 1.0) -> np.ndarray:
    """Linear frequency sweep from ``f0`` to ``f1`` Hz over ``n`` samples."""
    t = np.arange(n) * T
    span = max(t[-1], T)
    phase = 2.0 * math.pi * (f0 * t + 0.5 * (f1 - f0) * t * t / span)
    return amplitude * np.sin(phase)


def run_open_loop(config: ScenarioConfig, commands: np.ndarray) -> TelemetryLog:
    """Drive the actuator and vehicle directly with a steering-wheel command series."""
    T = config.sample_period
    actuator = ActuatorModel(config.delay_steps, config.noise_std, config.w1, config.w2,
                             rng_seed=config.seed, steering_ratio=config.steering_ratio)
    sensor_rng = np.random.Generator(np.random.PCG64([config.seed, 1]))
    state = config.initial_state()
    rec = _Recorder()
    prev_speed = state.speed
    for k, u in enumerate(commands):
        u = max(-config.actuator_limit, min(config.actuator_limit, float(u)))
        row = telemetry_row(k * T, state, u, 0.0, prev_speed, T, sensor_rng)
        theta = actuator.step(u)
        row[COLUMN_INDEX["steer_meas"]] = theta
        rec.rows.append(row)
        delta_f = max(-MAX_WHEEL_ANGLE, min(MAX_WHEEL_ANGLE, theta / config.steering_ratio))
        prev_speed = state.speed
        state = replace(bicycle_step(state, delta_f, config.speed, T, config.wheelbase),
                        steer_wheel_meas=theta)
    return rec.telemetry(T)


def _concat(logs: Sequence[TelemetryLog], T: float) -> TelemetryLog:
    data = np.vstack([log.data for log in logs])
    data[:, 0] = np.arange(len(data)) * T
    return TelemetryLog(T, data)


def simulate_training_log(config: ScenarioConfig, excitation: str = "mixed",
                          min_samples: int = 6000) -> TelemetryLog:
    """Generate a compensator-off telemetry corpus for training the predictor.

    ``mixed`` cycles chirp, double-lane-change and U-turn runs over several
    speeds (and seeds) until at least ``min_samples`` frames are recorded.
    """
    if excitation not in EXCITATIONS:
        raise ContractError(f"unknown excitation {excitation!r}; expected one of {EXCITATIONS}")
    config = replace(config, compensator_enabled=False, model_path=None)
    T = config.sample_period
    if excitation == "dlc":
        return run_simulation(config).telemetry
    if excitation == "u_turn":
        return run_simulation(config, path=u_turn_path()).telemetry
    if excitation == "chirp_steer":
        n = int(round(30.0 / T))
        return run_open_loop(config, chirp_signal(n, T))
    logs, total, cycle = [], 0, 0
    while total < min_samples:
        speed = MIXED_SPEEDS[cycle % len(MIXED_SPEEDS)]
        base = replace(config, speed=speed, seed=config.seed + 3 * cycle)
        parts = [
            run_open_loop(base, chirp_signal(int(round(20.0 / T)), T,
                                             amplitude=1.0 + 0.25 * (cycle % 3))),
            run_simulation(replace(base, seed=base.seed + 1)).telemetry,
            run_simulation(replace(base, seed=base.seed + 2), path=u_turn_path()).telemetry,
        ]
        for p in parts:
            logs.append(p)
            total += len(p)
        cycle += 1
    return _concat(logs, T)
