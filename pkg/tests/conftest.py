import numpy as np
import pytest

from steercomp.telemetry import TelemetryLog


def make_log(n=100, T=0.05, seed=0):
    """Smooth synthetic log with every column populated."""
    rng = np.random.default_rng(seed)
    t = np.arange(n) * T
    cols = {
        "t": t,
        "steer_cmd": 0.5 * np.sin(2 * np.pi * 0.3 * t),
        "steer_meas": 0.5 * np.sin(2 * np.pi * 0.3 * (t - 0.2)) + 0.01 * rng.normal(size=n),
        "steer_torque": 0.2 * np.cos(t),
        "vel_x": 8.0 + 0.1 * np.sin(0.5 * t),
        "ang_vel_z": 0.1 * np.sin(t),
        "acc_y": 0.8 * np.sin(t),
        "turning_radius": np.where(np.arange(n) % 7 == 0, np.nan, 20.0 + t),
    }
    for name in ("vel_y", "vel_z", "ang_vel_x", "ang_vel_y", "acc_x", "acc_z",
                 "wheel_speed_fl", "wheel_speed_fr", "wheel_speed_rl", "wheel_speed_rr"):
        cols[name] = rng.normal(size=n)
    return TelemetryLog.from_columns(T, **cols)


@pytest.fixture
def synthetic_log():
    return make_log()


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: dict[int, str] = {}


def record_acceptance(number: int, name: str, passed: bool, detail: str) -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] {number}. {name}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
