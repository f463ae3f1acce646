"""Gait timing, swing-foot Bezier references, leg inverse kinematics and joint PID."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .spatial import JointAngles, LegGeometry

log = logging.getLogger(__name__)

BEZIER_ORDER = 4
_BINOM = np.array([math.comb(BEZIER_ORDER, k) for k in range(BEZIER_ORDER + 1)], dtype=float)


class WorkspaceError(ValueError):
    """Target outside the leg workspace; ``clamped`` holds the nearest reachable solution."""

    def __init__(self, message: str, clamped: JointAngles):
        super().__init__(message)
        self.clamped = clamped


def other(side: str) -> str:
    return "R" if side == "L" else "L"


@dataclass
class GaitSchedule:
    step_duration: float = 0.4
    step_length: float = 0.15
    step_height: float = 0.05
    stance_leg: str = "L"
    phase: float = 0.0
    step_start: float = 0.0
    steps: int = 0

    def __post_init__(self):
        if self.step_duration <= 0:
            raise ValueError("step_duration must be positive")
        if self.stance_leg not in ("L", "R"):
            raise ValueError("stance_leg must be 'L' or 'R'")

    @property
    def swing_leg(self) -> str:
        return other(self.stance_leg)

    def update(self, t: float) -> float:
        self.phase = max(0.0, (t - self.step_start) / self.step_duration)
        return self.phase

    def switch(self, t: float) -> None:
        self.stance_leg = other(self.stance_leg)
        self.step_start = t
        self.phase = 0.0
        self.steps += 1


def switch_due(phase: float, touchdown: bool, window: float = 0.1) -> bool:
    """Timed switch gated by touchdown inside ``1 +/- window``; forced at the window's end."""
    if phase >= 1.0 + window:
        return True
    return touchdown and phase >= 1.0 - window


def bezier_eval(beta, s: float) -> tuple[float, float]:
    """Fourth-order Bernstein polynomial and its derivative in ``s``."""
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (BEZIER_ORDER + 1,):
        raise ValueError("need five Bezier coefficients")
    if not 0.0 <= s <= 1.0:
        log.warning("Bezier phase %.6g outside [0, 1]; clamping", s)
        s = min(1.0, max(0.0, s))
    k = np.arange(BEZIER_ORDER + 1)
    basis = _BINOM * s**k * (1.0 - s) ** (BEZIER_ORDER - k)
    value = float(basis @ beta)
    diff = beta[1:] - beta[:-1]
    k3 = np.arange(BEZIER_ORDER)
    b3 = np.array([math.comb(BEZIER_ORDER - 1, j) for j in k3]) * s**k3 * (1.0 - s) ** (BEZIER_ORDER - 1 - k3)
    return value, float(BEZIER_ORDER * (b3 @ diff))


class SwingTrajectory(NamedTuple):
    coefficients: np.ndarray  # (3, 5): x, y, z rows in the slope frame
    start: np.ndarray
    target: np.ndarray


def swing_coefficients(start, target, height: float) -> SwingTrajectory:
    """Endpoint-repeated coefficients; the z row gets an arc whose peak rises ``height``
    above the endpoints when they share the same height."""
    start = np.asarray(start, dtype=float)
    target = np.asarray(target, dtype=float)
    mid = 0.5 * (start + target)
    coeffs = np.column_stack([start, start, mid, target, target])
    # middle coefficient weight at s = 1/2 is 6/16
    coeffs[2, 2] += height * 16.0 / 6.0
    return SwingTrajectory(coeffs, start, target)


def swing_reference(schedule: GaitSchedule, start_foot, target_foot, trajectory: SwingTrajectory | None = None):
    """Slope-frame swing-foot position and velocity at the schedule's phase."""
    traj = trajectory or swing_coefficients(start_foot, target_foot, schedule.step_height)
    s = min(1.0, max(0.0, schedule.phase))
    pos = np.empty(3)
    vel = np.empty(3)
    for i in range(3):
        pos[i], d = bezier_eval(traj.coefficients[i], s)
        vel[i] = d / schedule.step_duration if schedule.phase < 1.0 else 0.0
    return pos, vel


def _wrap(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def leg_reach(geom: LegGeometry) -> tuple[float, float, float]:
    """(minimum reach, maximum reach, straight-leg knee angle) of the sagittal two-link."""
    l3x, l3z = geom.l3[0], geom.l3[2]
    a, b = geom.l4a, geom.l4b
    c0 = (l3x - a) ** 2 + l3z**2 + b**2
    ks, kc = -2.0 * b * (l3x - a), -2.0 * b * l3z
    amp = math.hypot(ks, kc)
    return math.sqrt(max(c0 - amp, 0.0)), math.sqrt(c0 + amp), math.atan2(ks, kc)


def inverse_kinematics(foot_target, geom: LegGeometry, tol: float = 1e-12) -> JointAngles:
    """Joint angles placing the foot at a body-frame target (knee-back branch)."""
    d = np.asarray(foot_target, dtype=float) - geom.l1
    l2 = geom.l2
    rho = math.hypot(d[1], d[2])
    reach_err = None
    if rho < abs(l2[1]):
        gamma = math.atan2(d[2], d[1])
        reach_err = "target inside the frontal hip offset"
    else:
        theta = math.atan2(d[2], d[1])
        delta = math.acos(l2[1] / rho) if rho > 0 else 0.0
        # walking branch: foot below the hip in the rolled leg frame
        gamma = min((_wrap(theta + delta), _wrap(theta - delta)), key=lambda g: -math.sin(g) * d[1] + math.cos(g) * d[2])
    cg, sg = math.cos(gamma), math.sin(gamma)
    v_x = d[0]
    v_z = -sg * d[1] + cg * d[2]
    tx, tz = v_x - l2[0], v_z - l2[2]
    r = math.hypot(tx, tz)

    rmin, rmax, phi_star = leg_reach(geom)
    l3x, l3z = geom.l3[0], geom.l3[2]
    a, b = geom.l4a, geom.l4b
    c0 = (l3x - a) ** 2 + l3z**2 + b**2
    amp = math.hypot(-2.0 * b * (l3x - a), -2.0 * b * l3z)
    cos_arg = (r * r - c0) / amp
    if cos_arg > 1.0 + tol or cos_arg < -1.0 - tol:
        reach_err = reach_err or f"target distance {r:.6g} m outside reach [{rmin:.6g}, {rmax:.6g}]"
    cos_arg = min(1.0, max(-1.0, cos_arg))
    phi_k = _wrap(phi_star - math.acos(cos_arg))
    ux = l3x - a - b * math.sin(phi_k)
    uz = l3z - b * math.cos(phi_k)
    phi_h = _wrap(math.atan2(tx, tz) - math.atan2(ux, uz))
    q = JointAngles(gamma, phi_h, phi_k)
    if reach_err:
        raise WorkspaceError(reach_err, q)
    return q


@dataclass(frozen=True, eq=False)
class PidGains:
    K_p: np.ndarray = field(default_factory=lambda: np.full(3, 80.0))
    K_i: np.ndarray = field(default_factory=lambda: np.full(3, 5.0))
    K_d: np.ndarray = field(default_factory=lambda: np.full(3, 2.0))
    integral_limit: float = 10.0

    def __post_init__(self):
        for name in ("K_p", "K_i", "K_d"):
            val = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), (3,)).copy()
            if np.any(val < 0):
                raise ValueError(f"{name} must be nonnegative")
            object.__setattr__(self, name, val)


def clamp_integral(integral, gains: PidGains) -> np.ndarray:
    """Anti-windup: limit ``K_i * integral`` to ``+/- integral_limit`` per joint."""
    integral = np.asarray(integral, dtype=float).copy()
    lim = gains.integral_limit
    for i in range(integral.size):
        if gains.K_i[i] > 0:
            bound = lim / gains.K_i[i]
            integral[i] = min(bound, max(-bound, integral[i]))
    return integral


def pid_torque(q_error, q_error_rate, q_error_integral, gains: PidGains) -> np.ndarray:
    e = np.asarray(q_error, dtype=float)
    ed = np.asarray(q_error_rate, dtype=float)
    ei = clamp_integral(q_error_integral, gains)
    return gains.K_p * e + gains.K_i * ei + gains.K_d * ed
