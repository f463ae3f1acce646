"""Rotation algebra and the leg kinematic chain.

Frames: ``B`` body, ``P`` pelvis (body rotated by Rx(gamma_h)), ``H`` thigh
(pelvis rotated by Ry(phi_h)).  All leg offsets below are expressed in the
body frame unless a name says otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import NamedTuple

import numpy as np

from ._kernel import leg_chain_kernel

E_X = np.array([1.0, 0.0, 0.0])
E_Y = np.array([0.0, 1.0, 0.0])

LEFT = "L"
RIGHT = "R"


def rot_x(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_axis(axis: str, angle: float) -> np.ndarray:
    """Right-handed rotation about ``x`` or ``y``."""
    if not math.isfinite(angle):
        raise ValueError(f"rotation angle must be finite, got {angle}")
    if axis == "x":
        return rot_x(angle)
    if axis == "y":
        return rot_y(angle)
    raise ValueError(f"unsupported axis {axis!r}")


def skew(v) -> np.ndarray:
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def vee(S: np.ndarray) -> np.ndarray:
    return np.array([S[2, 1], S[0, 2], S[1, 0]])


def is_rotation(R: np.ndarray, tol: float = 1e-9) -> bool:
    R = np.asarray(R, dtype=float)
    return (
        R.shape == (3, 3)
        and np.max(np.abs(R.T @ R - np.eye(3))) < tol
        and abs(np.linalg.det(R) - 1.0) < tol
    )


def cross(a, b) -> np.ndarray:
    # np.cross is slow for single 3-vectors
    return np.array(
        [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
    )


@dataclass(frozen=True, eq=False)
class LegGeometry:
    """Constant link vectors of one leg, each in its local frame (meters).

    ``l4a`` and ``l4b`` parametrize the lower-leg parallel linkage: the
    knee-to-foot vector in the knee frame is
    ``[-l4a cos(phi_k), 0, -(l4b + l4a sin(phi_k))]``.
    """

    l1: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.1, -0.1]))
    l2: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.5, 0.0]))
    l3: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -0.3]))
    l4a: float = 0.1
    l4b: float = 0.3
    lt: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.2, 0.0]))
    side: str = LEFT

    def __post_init__(self):
        for name in ("l1", "l2", "l3", "lt"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).reshape(3))
        if self.l4a <= 0.0 or self.l4b < 0.0:
            raise ValueError("lower-leg linkage needs l4a > 0 and l4b >= 0")
        if abs(self.l3[1]) > 0.0:
            raise ValueError("l3 must lie in the thigh x-z plane")
        if self.side not in (LEFT, RIGHT):
            raise ValueError(f"side must be {LEFT!r} or {RIGHT!r}")

    @cached_property
    def packed(self) -> np.ndarray:
        return np.concatenate([self.l1, self.l2, self.l3, [self.l4a, self.l4b], self.lt])

    def mirrored(self) -> "LegGeometry":
        flip = np.array([1.0, -1.0, 1.0])
        return replace(
            self,
            l1=self.l1 * flip,
            l2=self.l2 * flip,
            l3=self.l3 * flip,
            lt=self.lt * flip,
            side=RIGHT if self.side == LEFT else LEFT,
        )


class JointAngles(NamedTuple):
    gamma_h: float
    phi_h: float
    phi_k: float


class LegPoints(NamedTuple):
    p_P: np.ndarray
    p_H: np.ndarray
    p_K: np.ndarray
    p_F: np.ndarray
    p_T: np.ndarray


def knee_to_foot(phi_k: float, geom: LegGeometry) -> np.ndarray:
    """Knee-to-foot vector in the knee frame (linkage closed-form)."""
    return np.array(
        [-geom.l4a * math.cos(phi_k), 0.0, -(geom.l4b + geom.l4a * math.sin(phi_k))]
    )


def forward_kinematics(p_B, R_B, q: JointAngles, geom: LegGeometry) -> LegPoints:
    """Inertial positions of pelvis, hip, knee, foot and thruster points."""
    p_B = np.asarray(p_B, dtype=float)
    R_B = np.asarray(R_B, dtype=float)
    R_P = R_B @ rot_x(q.gamma_h)
    R_H = R_P @ rot_y(q.phi_h)
    R_K = R_H @ rot_y(q.phi_k)
    p_P = p_B + R_B @ geom.l1
    p_H = p_P + R_P @ geom.l2
    p_K = p_H + R_H @ geom.l3
    p_F = p_K + R_K @ knee_to_foot(q.phi_k, geom)
    p_T = p_B + R_B @ geom.lt
    return LegPoints(p_P, p_H, p_K, p_F, p_T)


class LegChain(NamedTuple):
    """Body-frame leg kinematics with first and second order terms.

    ``S_*`` are 3x3 Jacobians w.r.t. (gamma_h, phi_h, phi_k); ``sdot_*`` the
    body-frame point velocities due to joint rates; ``sddot_*`` the
    joint-rate-quadratic accelerations (joint accelerations zero).
    ``Sdot_F`` is the time derivative of ``S_F``.
    """

    R_P: np.ndarray
    R_H: np.ndarray
    s_H: np.ndarray
    s_K: np.ndarray
    s_F: np.ndarray
    S_H: np.ndarray
    S_K: np.ndarray
    S_F: np.ndarray
    sdot_H: np.ndarray
    sdot_K: np.ndarray
    sdot_F: np.ndarray
    sddot_H: np.ndarray
    sddot_K: np.ndarray
    sddot_F: np.ndarray
    Sdot_F: np.ndarray


def leg_chain(angles, rates, geom: LegGeometry) -> LegChain:
    g, h, k = angles
    gd, hd, kd = rates
    return LegChain(*leg_chain_kernel(
        float(g), float(h), float(k), float(gd), float(hd), float(kd), geom.packed))


POINTS = ("foot", "hip", "knee", "thruster")


def point_jacobian(state, params, point: str):
    """Inertial Jacobian ``J = d p_dot / d v`` of a leg point and its time derivative.

    ``point`` is ``"<name>_<side>"`` with name in :data:`POINTS`, e.g. ``"foot_L"``.
    ``state`` is a :class:`~thrustwalk.model.RobotState` or its flat vector.
    """
    name, _, side = point.partition("_")
    if name not in POINTS or side not in (LEFT, RIGHT):
        raise ValueError(f"unknown point selector {point!r}")
    x = state.to_vector() if hasattr(state, "to_vector") else np.asarray(state, dtype=float)
    i = 0 if side == LEFT else 1
    cols = [6 + i, 8 + i, 10 + i]
    R = x[0:9].reshape(3, 3)
    omega = x[18:21]
    geom = params.leg(side)
    gd, hd = x[24 + i], x[26 + i]
    ch = leg_chain((x[12 + i], x[14 + i], x[16 + i]), (gd, hd, x[28 + i]), geom)
    if name == "foot":
        s, S, sdot, Sdot = ch.s_F, ch.S_F, ch.sdot_F, ch.Sdot_F
    elif name == "hip":
        s, S, sdot = ch.s_H, ch.S_H, ch.sdot_H
        Sdot = np.column_stack((cross(E_X, sdot), np.zeros(3), np.zeros(3)))
    elif name == "knee":
        s, S, sdot = ch.s_K, ch.S_K, ch.sdot_K
        ey = ch.R_P[:, 1]
        ey_dot = cross(gd * E_X, ey)
        r_KH = ch.s_K - ch.s_H
        rdot_KH = ch.sdot_K - ch.sdot_H
        Sdot = np.column_stack(
            (cross(E_X, sdot), cross(ey_dot, r_KH) + cross(ey, rdot_KH), np.zeros(3))
        )
    else:
        s, S, sdot, Sdot = geom.lt, np.zeros((3, 3)), np.zeros(3), np.zeros((3, 3))

    Jb = np.zeros((3, 12))
    Jb[:, 0:3] = -skew(s)
    Jb[:, 3:6] = R.T
    Jb[:, cols] = S
    Jb_dot = np.zeros((3, 12))
    Jb_dot[:, 0:3] = -skew(sdot)
    Jb_dot[:, 3:6] = -skew(omega) @ R.T
    Jb_dot[:, cols] = Sdot
    J = R @ Jb
    Jdot = R @ (skew(omega) @ Jb + Jb_dot)
    return J, Jdot
