import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from steercomp.compensator import (
    CompensatorGains, CompensatorState, Mode, compensate, compensator_step,
)
from steercomp.errors import ContractError

W0 = math.radians(2.0)
STRAIGHT, CURVE = 0.0, 0.2


def run(errors, yaw, gains):
    state = CompensatorState()
    outs, states = [], []
    for e, w in zip(errors, yaw):
        u1, state = compensator_step(state, e, w, gains)
        outs.append(u1)
        states.append(state)
    return outs, states


def test_zero_error_gives_zero_output_in_both_modes():
    g = CompensatorGains(kp=0.7, ki=0.3, kd=0.1)
    yaw = np.linspace(-0.3, 0.3, 200)
    outs, _ = run(np.zeros(200), yaw, g)
    assert all(u == 0.0 for u in outs)


def test_pure_proportional_when_ki_is_zero():
    g = CompensatorGains(kp=1.0, ki=0.0)
    errs = [0.1, -0.3, 0.25, 0.0, 0.4]
    outs, _ = run(errs, [STRAIGHT] * 5, g)
    assert outs == errs


def test_integrator_accumulates():
    g = CompensatorGains(kp=0.0, ki=1.0, sample_period=0.05)
    outs, _ = run([0.1] * 3, [STRAIGHT] * 3, g)
    np.testing.assert_allclose(outs, [0.005, 0.010, 0.015], atol=1e-15)


def test_integrator_resets_on_sign_change():
    kp, ki, T = 0.4, 0.1, 0.05
    g = CompensatorGains(kp=kp, ki=ki, sample_period=T)
    outs, states = run([0.1, -0.1], [STRAIGHT] * 2, g)
    assert states[1].integrator == pytest.approx(T * -0.1, abs=1e-15)
    assert outs[1] == pytest.approx(kp * -0.1 + ki * T * -0.1, abs=1e-15)


def test_pd_backward_difference():
    g = CompensatorGains(kp=0.0, kd=1.0, sample_period=0.05, output_limit=10.0)
    outs, states = run([0.0, 0.1], [CURVE] * 2, g)
    assert outs == [0.0, pytest.approx(2.0, abs=1e-12)]
    assert all(s.mode is Mode.PD for s in states)


def test_pd_matches_hand_differences():
    kp, kd, T = 0.3, 0.02, 0.05
    g = CompensatorGains(kp=kp, kd=kd, sample_period=T)
    errs = [0.05, 0.08, 0.02, -0.04, -0.01]
    outs, _ = run(errs, [CURVE] * len(errs), g)
    expected = [kp * errs[0]] + [kp * errs[i] + kd * (errs[i] - errs[i - 1]) / T for i in range(1, len(errs))]
    np.testing.assert_allclose(outs, expected, atol=1e-15)


def test_output_is_saturated():
    g = CompensatorGains(kp=0.0, kd=1.0, output_limit=1.0)
    outs, _ = run([0.0, 0.5], [CURVE] * 2, g)
    assert outs[1] == 1.0


def test_mode_boundary_is_pi():
    _, s = compensator_step(CompensatorState(), 0.1, W0, CompensatorGains())
    assert s.mode is Mode.PI
    _, s = compensator_step(CompensatorState(), 0.1, -np.nextafter(W0, 1.0), CompensatorGains())
    assert s.mode is Mode.PD


def test_mode_on_yaw_sweep():
    yaw = np.linspace(-0.1, 0.1, 401)
    _, states = run(np.full(401, 0.01), yaw, CompensatorGains())
    for w, s in zip(yaw, states):
        assert (s.mode is Mode.PI) == (abs(w) <= W0)


def test_pd_holds_integrator():
    g = CompensatorGains()
    outs, states = run([0.1, 0.1, 0.1], [STRAIGHT, CURVE, CURVE], g)
    assert states[1].integrator == states[2].integrator == states[0].integrator


def test_non_finite_input_rejected():
    with pytest.raises(ContractError):
        compensator_step(CompensatorState(), float("nan"), 0.0, CompensatorGains())


def test_invalid_gains_rejected():
    with pytest.raises(ContractError):
        CompensatorGains(kp=-1.0)
    with pytest.raises(ContractError):
        CompensatorGains(sample_period=0.0)


def test_compensate_examples():
    assert compensate(0.3, 0.0, 6.0) == (0.3, False)
    u, sat = compensate(0.3, 0.05, 6.0)
    assert u == pytest.approx(0.35) and not sat
    assert compensate(5.9, 0.5, 6.0) == (6.0, True)
    assert compensate(-5.9, -0.5, 6.0) == (-6.0, True)


streams = st.lists(
    st.tuples(st.floats(-0.5, 0.5, allow_nan=False), st.floats(-0.2, 0.2, allow_nan=False)),
    min_size=1, max_size=60,
)


@settings(max_examples=80)
@given(streams)
def test_scheduling_and_reset_invariants(stream):
    g = CompensatorGains()
    errs = [e for e, _ in stream]
    yaw = [w for _, w in stream]
    outs, states = run(errs, yaw, g)
    prev_state = CompensatorState()
    for k, (e, w) in enumerate(stream):
        s = states[k]
        assert (s.mode is Mode.PI) == (abs(w) <= g.w0)
        assert abs(outs[k]) <= g.output_limit
        if s.mode is Mode.PI:
            prev_e = prev_state.prev_error if prev_state.initialized else e
            base = 0.0 if e * prev_e < 0 else prev_state.integrator
            assert s.integrator == pytest.approx(base + g.sample_period * e, abs=1e-15)
        else:
            assert s.integrator == prev_state.integrator
        prev_state = s


@settings(max_examples=50)
@given(streams, st.floats(-5, 5), st.floats(0.1, 10))
def test_compensated_command_stays_in_limits(stream, u_cmd, limit):
    for e, _ in stream:
        u, sat = compensate(u_cmd, e, limit)
        assert -limit <= u <= limit
        assert sat == (abs(u_cmd + e) > limit)
