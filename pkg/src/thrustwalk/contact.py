"""Compliant point-foot ground contact with Stribeck friction on an incline.

Penetration and slip are measured in the slope-aligned frame (x up the incline,
z along the surface normal); forces are returned in that frame per foot and
rotated back to the inertial frame for the equations of motion.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .dynamics import Evaluation, evaluate
from .model import GroundParams, RobotParams, RobotState


class GroundForce(NamedTuple):
    force: np.ndarray  # (u_gx, u_gy, u_gz) in the slope frame, N
    contact: bool


def normal_force(p_z: float, p_z_dot: float, params: GroundParams) -> float:
    if p_z >= 0.0:
        return 0.0
    k_d = 0.0 if p_z_dot > 0.0 else params.k_gd
    return max(0.0, -params.k_gp * p_z - k_d * p_z_dot)


def _sgn(v: float) -> float:
    return 0.0 if v == 0.0 else math.copysign(1.0, v)


def tangential_friction(v_t: float, f_z: float, params: GroundParams) -> float:
    """Stribeck friction along one tangential axis."""
    coeff = params.mu_c + (params.mu_s - params.mu_c) * math.exp(-(v_t * v_t) / (params.v_s**2))
    return -coeff * f_z * _sgn(v_t) - params.mu_v * v_t


def foot_force(p_slope: np.ndarray, v_slope: np.ndarray, params: GroundParams) -> GroundForce:
    """Force on one foot given its slope-frame position and velocity."""
    if p_slope[2] >= 0.0:
        return GroundForce(np.zeros(3), False)
    f_z = normal_force(p_slope[2], v_slope[2], params)
    f = np.array(
        [
            tangential_friction(v_slope[0], f_z, params),
            tangential_friction(v_slope[1], f_z, params),
            f_z,
        ]
    )
    return GroundForce(f, True)


def wrench_from_evaluation(ev: Evaluation, ground: GroundParams):
    """``u_g`` (inertial, 6) and per-foot slope-frame forces from a kinematic evaluation."""
    Rs = ground.slope_rotation()
    u_g = np.zeros(6)
    forces = []
    for i in range(2):
        gf = foot_force(Rs.T @ ev.foot_pos[i], Rs.T @ ev.foot_vel[i], ground)
        forces.append(gf)
        if gf.contact:
            u_g[3 * i:3 * i + 3] = Rs @ gf.force
    return u_g, forces


def ground_wrench(state: RobotState | np.ndarray, params: RobotParams):
    x = state.to_vector() if isinstance(state, RobotState) else np.asarray(state, dtype=float)
    return wrench_from_evaluation(evaluate(x, params, with_dynamics=False), params.ground)


def slope_coordinates(p: np.ndarray, ground: GroundParams) -> np.ndarray:
    """Express an inertial point in the slope-aligned frame."""
    return ground.slope_rotation().T @ np.asarray(p, dtype=float)
