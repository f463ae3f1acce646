import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from thrustwalk import oracles
from thrustwalk.checks import random_state
from thrustwalk.spatial import (
    JointAngles,
    LegGeometry,
    forward_kinematics,
    is_rotation,
    knee_to_foot,
    point_jacobian,
    rot_axis,
    skew,
)

angles = st.floats(-10.0, 10.0, allow_nan=False)


def test_rot_x_zero_is_identity():
    assert np.array_equal(rot_axis("x", 0.0), np.eye(3))


def test_rot_x_quarter_turn():
    assert np.allclose(rot_axis("x", math.pi / 2) @ [0, 1, 0], [0, 0, 1], atol=1e-15)


def test_rot_y_half_turn():
    assert np.allclose(rot_axis("y", math.pi), np.diag([-1.0, 1.0, -1.0]), atol=1e-15)


def test_rot_axis_rejects_bad_input():
    with pytest.raises(ValueError):
        rot_axis("z", 0.1)
    with pytest.raises(ValueError):
        rot_axis("x", float("nan"))


@given(axis=st.sampled_from("xy"), angle=angles)
def test_rot_axis_is_rotation(axis, angle):
    R = rot_axis(axis, angle)
    assert np.max(np.abs(R.T @ R - np.eye(3))) < 1e-12
    assert abs(np.linalg.det(R) - 1.0) < 1e-12


@given(angle=angles)
def test_rot_axis_matches_matrix_exponential(angle):
    for axis, e in (("x", [1, 0, 0]), ("y", [0, 1, 0])):
        assert np.allclose(rot_axis(axis, angle), expm(angle * skew(e)), atol=1e-12)


def test_pelvis_point_uses_l1():
    geom = LegGeometry()
    pts = forward_kinematics(np.zeros(3), np.eye(3), JointAngles(0.3, -0.2, 0.5), geom)
    assert np.allclose(pts.p_P, [0.0, 0.1, -0.1], atol=0)


def test_knee_to_foot_at_zero():
    geom = LegGeometry(l4a=0.1, l4b=0.3)
    assert np.allclose(knee_to_foot(0.0, geom), [-0.1, 0.0, -0.3], atol=0)


def test_right_leg_mirrors_left_geometry(params):
    L, R = params.leg("L"), params.leg("R")
    for name in ("l1", "l2", "l3", "lt"):
        assert np.array_equal(getattr(R, name), getattr(L, name) * [1, -1, 1])
    assert R.side == "R"


def test_geometry_invariants():
    with pytest.raises(ValueError):
        LegGeometry(l4a=0.0)
    with pytest.raises(ValueError):
        LegGeometry(l4b=-0.1)


def _random_pose(rng):
    x = random_state(rng)
    return x[9:12], x[0:9].reshape(3, 3), JointAngles(*rng.uniform(-math.pi, math.pi, 3))


def test_forward_kinematics_matches_independent_chain(rng, params):
    for _ in range(50):
        p_B, R_B, q = _random_pose(rng)
        for side in "LR":
            geom = params.leg(side)
            pts = forward_kinematics(p_B, R_B, q, geom)
            ref = oracles.leg_bodies(p_B, R_B, q.gamma_h, q.phi_h, q.phi_k, geom)
            assert np.max(np.abs(pts.p_H - ref["H"][0])) < 1e-12
            assert np.max(np.abs(pts.p_K - ref["K"][0])) < 1e-12
            assert np.max(np.abs(pts.p_F - ref["F"][0])) < 1e-12
            assert np.max(np.abs(pts.p_T - ref["T"][0])) < 1e-12


def test_forward_kinematics_preserves_link_lengths(rng, params):
    geom = params.leg("L")
    for _ in range(50):
        p_B, R_B, q = _random_pose(rng)
        pts = forward_kinematics(p_B, R_B, q, geom)
        assert abs(np.linalg.norm(pts.p_H - pts.p_P) - np.linalg.norm(geom.l2)) < 1e-12
        assert abs(np.linalg.norm(pts.p_K - pts.p_H) - np.linalg.norm(geom.l3)) < 1e-12
        assert abs(np.linalg.norm(pts.p_F - pts.p_K) - np.linalg.norm(knee_to_foot(q.phi_k, geom))) < 1e-12


def test_left_right_mirror_symmetry(rng, params):
    D = np.diag([1.0, -1.0, 1.0])
    for _ in range(50):
        p_B, R_B, q = _random_pose(rng)
        left = forward_kinematics(p_B, R_B, q, params.leg("L"))
        q_m = JointAngles(-q.gamma_h, q.phi_h, q.phi_k)
        right = forward_kinematics(D @ p_B, D @ R_B @ D, q_m, params.leg("R"))
        for a, b in zip(left, right):
            assert np.max(np.abs(D @ a - b)) < 1e-12


def _point_position(x, params, point):
    name, side = point.split("_")
    geom = params.leg(side)
    i = 0 if side == "L" else 1
    pts = forward_kinematics(x[9:12], x[0:9].reshape(3, 3), JointAngles(x[12 + i], x[14 + i], x[16 + i]), geom)
    return {"foot": pts.p_F, "hip": pts.p_H, "knee": pts.p_K, "thruster": pts.p_T}[name]


def _flow(x, v, h):
    """Configuration reached after moving with generalized velocity ``v`` for time ``h``."""
    xs = x.copy()
    R = x[0:9].reshape(3, 3)
    xs[0:9] = (R @ expm(h * skew(v[0:3]))).reshape(9)
    xs[9:18] = x[9:18] + h * v[3:12]
    xs[18:30] = v
    return xs


POINTS = ["foot_L", "foot_R", "hip_L", "knee_R", "thruster_L"]


@pytest.mark.parametrize("point", POINTS)
def test_point_jacobian_vs_finite_differences(point, rng, params):
    h = 1e-6
    for _ in range(20):
        x = random_state(rng)
        J, _ = point_jacobian(x, params, point)
        for _ in range(3):
            v = rng.normal(size=12)
            fd = (_point_position(_flow(x, v, h), params, point) - _point_position(_flow(x, v, -h), params, point)) / (2 * h)
            assert np.max(np.abs(J @ v - fd)) < 1e-6


@pytest.mark.parametrize("point", POINTS)
def test_jacobian_rate_vs_time_finite_differences(point, rng, params):
    h = 1e-6
    for _ in range(20):
        x = random_state(rng)
        v = x[18:30]
        _, Jdot = point_jacobian(x, params, point)
        fd = (point_jacobian(_flow(x, v, h), params, point)[0] @ v - point_jacobian(_flow(x, v, -h), params, point)[0] @ v) / (2 * h)
        assert np.max(np.abs(Jdot @ v - fd)) < 1e-5


def test_body_translation_block_is_identity(params):
    x = random_state(np.random.default_rng(0))
    x[0:9] = np.eye(3).reshape(9)
    x[24:30] = 0.0
    for point in ("foot_L", "hip_R", "knee_L", "thruster_R"):
        J, _ = point_jacobian(x, params, point)
        assert np.array_equal(J[:, 3:6], np.eye(3))


def test_point_jacobian_rejects_unknown_point(params):
    with pytest.raises(ValueError):
        point_jacobian(np.zeros(30), params, "elbow_L")


@settings(max_examples=50)
@given(seed=st.integers(0, 2**31))
def test_random_state_attitude_is_rotation(seed):
    assert is_rotation(random_state(np.random.default_rng(seed))[0:9].reshape(3, 3))
