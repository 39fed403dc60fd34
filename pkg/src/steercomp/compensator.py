"""Gain-scheduled PI/PD feedforward compensator.

The predicted future steering error drives a PI law while the desired yaw
rate stays within ``w0`` (straight driving) and a PD law otherwise (curves).
``Tz/(z-1)`` is realised as a backward-Euler accumulator and ``(z-1)/(Tz)``
as a backward difference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import ContractError


class Mode(str, Enum):
    PI = "PI"
    PD = "PD"


@dataclass(frozen=True)
class CompensatorGains:
    kp: float = 0.4
    ki: float = 0.1
    kd: float = 0.002
    w0: float = math.radians(2.0)
    sample_period: float = 0.05
    output_limit: float = 1.0

    def __post_init__(self):
        if not self.sample_period > 0:
            raise ContractError("sample_period must be positive")
        if not self.w0 > 0:
            raise ContractError("w0 must be positive")
        if not self.output_limit > 0:
            raise ContractError("output_limit must be positive")
        if min(self.kp, self.ki, self.kd) < 0:
            raise ContractError("gains must be non-negative")


@dataclass(frozen=True)
class CompensatorState:
    mode: Mode = Mode.PI
    integrator: float = 0.0
    prev_error: float = 0.0
    initialized: bool = False


def _clamp(x: float, limit: float) -> float:
    return max(-limit, min(limit, x))


def compensator_step(state: CompensatorState, e_hat: float, yaw_rate: float, gains: CompensatorGains):
    """Advance one sample; returns ``(u1, next_state)``."""
    if not (math.isfinite(e_hat) and math.isfinite(yaw_rate)):
        raise ContractError("compensator inputs must be finite")
    T = gains.sample_period
    prev = state.prev_error if state.initialized else e_hat
    integrator = state.integrator
    if abs(yaw_rate) <= gains.w0:
        mode = Mode.PI
        if e_hat * prev < 0.0:
            integrator = 0.0
        integrator += T * e_hat
        u1 = gains.kp * e_hat + gains.ki * integrator
    else:
        mode = Mode.PD
        u1 = gains.kp * e_hat + gains.kd * (e_hat - prev) / T
    u1 = _clamp(u1, gains.output_limit)
    return u1, CompensatorState(mode, integrator, e_hat, True)


def compensate(u_cmd: float, u1: float, actuator_limit: float):
    """Add the correction to the tracking command; returns ``(u, saturated)``."""
    raw = u_cmd + u1
    u = _clamp(raw, actuator_limit)
    return u, u != raw

