import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thrustwalk.config import SimConfig
from thrustwalk.dynamics import dynamics_terms
from thrustwalk.gait import (
    GaitSchedule,
    PidGains,
    WorkspaceError,
    bezier_eval,
    clamp_integral,
    inverse_kinematics,
    leg_reach,
    pid_torque,
    swing_coefficients,
    swing_reference,
    switch_due,
)
from thrustwalk.sim import rk4_step, standing_state
from thrustwalk.spatial import JointAngles, forward_kinematics

BETA = (0.0, 0.0, 1.0, 2.0, 2.0)


def test_bezier_endpoints():
    assert bezier_eval(BETA, 0.0)[0] == 0.0
    assert bezier_eval(BETA, 1.0)[0] == 2.0


def test_bezier_endpoint_derivatives_vanish_with_repeated_coefficients():
    assert bezier_eval(BETA, 0.0)[1] == 0.0
    assert bezier_eval(BETA, 1.0)[1] == 0.0


def test_bezier_midpoint_value():
    assert bezier_eval(BETA, 0.5)[0] == pytest.approx(1.0, abs=1e-15)


@given(s=st.floats(1e-3, 1.0 - 1e-3), beta=st.lists(st.floats(-5, 5), min_size=5, max_size=5))
def test_bezier_derivative_matches_finite_difference(s, beta):
    h = 1e-6
    fd = (bezier_eval(beta, s + h)[0] - bezier_eval(beta, s - h)[0]) / (2 * h)
    assert abs(bezier_eval(beta, s)[1] - fd) < 1e-6 * (1 + max(map(abs, beta)))


def test_bezier_rejects_wrong_length():
    with pytest.raises(ValueError):
        bezier_eval([0.0, 1.0], 0.5)


def _schedule(phase):
    sch = GaitSchedule()
    sch.phase = phase
    return sch


START, TARGET = np.array([-0.075, 0.1, 0.0]), np.array([0.075, 0.1, 0.0])


def test_swing_reference_endpoints():
    pos0, vel0 = swing_reference(_schedule(0.0), START, TARGET)
    pos1, vel1 = swing_reference(_schedule(1.0), START, TARGET)
    assert np.allclose(pos0, START, atol=1e-15) and np.allclose(pos1, TARGET, atol=1e-15)
    assert not np.any(vel0) and not np.any(vel1)


def test_swing_apex_equals_step_height():
    sch = GaitSchedule()
    traj = swing_coefficients(START, TARGET, sch.step_height)
    s = np.linspace(0.0, 1.0, 2001)
    z = np.array([bezier_eval(traj.coefficients[2], si)[0] for si in s])
    assert z.max() == pytest.approx(sch.step_height, abs=1e-12)
    assert s[np.argmax(z)] == pytest.approx(0.5, abs=1e-3)


@settings(max_examples=50)
@given(
    start=st.tuples(st.floats(-0.3, 0.3), st.floats(-0.2, 0.2), st.floats(0.0, 0.05)),
    target=st.tuples(st.floats(-0.3, 0.3), st.floats(-0.2, 0.2), st.floats(0.0, 0.05)),
    s=st.floats(0.0, 1.0),
)
def test_swing_foot_stays_above_slope(start, target, s):
    traj = swing_coefficients(start, target, 0.05)
    assert bezier_eval(traj.coefficients[2], s)[0] >= -1e-12


def _random_angles(rng):
    return JointAngles(rng.uniform(-0.4, 0.4), rng.uniform(-1.0, 1.0), rng.uniform(-1.5, -0.2))


def test_inverse_kinematics_round_trip(rng, params):
    for side in "LR":
        geom = params.leg(side)
        for _ in range(50):
            q = _random_angles(rng)
            foot = forward_kinematics(np.zeros(3), np.eye(3), q, geom).p_F
            sol = inverse_kinematics(foot, geom)
            assert max(abs(a - b) for a, b in zip(sol, q)) < 1e-9


def test_maximum_reach_below_hip(params):
    geom = params.leg("L")
    _, rmax, phi_star = leg_reach(geom)
    q = JointAngles(0.0, 0.0, phi_star)
    pts = forward_kinematics(np.zeros(3), np.eye(3), q, geom)
    # rotating the hip pitch so the fully extended leg points straight down
    hip = pts.p_H
    v = pts.p_F - hip
    assert np.linalg.norm(v) == pytest.approx(rmax, abs=1e-12)
    target = hip + np.array([0.0, 0.0, -rmax])
    sol = inverse_kinematics(target, geom)
    assert sol.phi_k == pytest.approx(phi_star, abs=1e-6)
    assert np.allclose(forward_kinematics(np.zeros(3), np.eye(3), sol, geom).p_F, target, atol=1e-9)


def test_target_beyond_reach_raises(params):
    geom = params.leg("L")
    _, rmax, _ = leg_reach(geom)
    hip = forward_kinematics(np.zeros(3), np.eye(3), JointAngles(0.0, 0.0, 0.0), geom).p_H
    with pytest.raises(WorkspaceError) as info:
        inverse_kinematics(hip + [0.0, 0.0, -(rmax + 1e-3)], geom)
    assert isinstance(info.value.clamped, JointAngles)


def test_zero_error_gives_zero_torque():
    assert not np.any(pid_torque(np.zeros(3), np.zeros(3), np.zeros(3), PidGains()))


def test_proportional_only():
    gains = PidGains(K_p=[50.0, 0.0, 0.0], K_i=0.0, K_d=0.0)
    assert np.array_equal(pid_torque([0.1, 0.0, 0.0], np.zeros(3), np.zeros(3), gains), [5.0, 0.0, 0.0])


def test_integral_anti_windup():
    gains = PidGains(K_p=0.0, K_i=5.0, K_d=0.0)
    assert np.allclose(clamp_integral([100.0, -100.0, 1.0], gains), [2.0, -2.0, 1.0])
    assert np.allclose(pid_torque(np.zeros(3), np.zeros(3), [100.0, -100.0, 1.0], gains), [10.0, -10.0, 5.0])


def test_gains_validation():
    with pytest.raises(ValueError):
        PidGains(K_p=[-1.0, 0.0, 0.0])


def _settling_time(inertia, kp, ki, kd, dt=1e-4, t_end=3.0, band=0.02):
    """Unit step on an isolated joint driven by PID; returns the 2% settling time."""

    def f(y, _):
        e, ed_int, qd = 1.0 - y[0], y[1], y[2]
        tau = kp * e + ki * ed_int - kd * qd
        return np.array([qd, e, tau / inertia])

    y = np.zeros(3)
    last_out = 0.0
    t = 0.0
    while t < t_end:
        y = rk4_step(f, y, None, dt)
        t += dt
        if abs(1.0 - y[0]) > band:
            last_out = t
    return last_out


def test_sagittal_swing_joints_settle_within_a_step(params):
    cfg = SimConfig()
    M = dynamics_terms(standing_state(params).to_vector(), params).M
    g = cfg.pid
    hip_pitch = _settling_time(M[8, 8], g.K_p[1], g.K_i[1], g.K_d[1])
    knee = _settling_time(1.0, g.K_p[2], g.K_i[2], g.K_d[2])  # acceleration-driven channel
    assert hip_pitch < cfg.gait.step_duration
    assert knee < cfg.gait.step_duration


def test_hip_roll_is_underdamped_in_isolation(params):
    """The frontal joint carries the whole leg; the shared gains leave it lightly damped."""
    g = SimConfig().pid
    M = dynamics_terms(standing_state(params).to_vector(), params).M
    zeta = g.K_d[0] / (2.0 * math.sqrt(g.K_p[0] * M[6, 6]))
    assert 0.1 < zeta < 0.3


def test_switch_rule():
    assert not switch_due(0.5, True)
    assert switch_due(0.95, True)
    assert not switch_due(0.95, False)
    assert not switch_due(1.05, False)
    assert switch_due(1.1, False)


def test_schedule_switch():
    sch = GaitSchedule()
    assert sch.update(0.2) == pytest.approx(0.5)
    sch.switch(0.4)
    assert sch.stance_leg == "R" and sch.swing_leg == "L" and sch.steps == 1
    assert sch.update(0.4) == 0.0
    with pytest.raises(ValueError):
        GaitSchedule(step_duration=0.0)
