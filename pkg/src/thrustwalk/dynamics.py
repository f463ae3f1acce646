"""Equations of motion of the full robot model.

The generalized velocity is ``v = [omega_B (body frame), p_B_dot, gamma_dot_L,
gamma_dot_R, phi_h_dot_L, phi_h_dot_R, phi_k_dot_L, phi_k_dot_R]``.  Massive
components are the body, both hip motors and both knee motors; the knee
coordinates carry no inertia and are driven by acceleration inputs.

``M`` and ``h`` are assembled by projecting each component's Newton-Euler
equations onto the generalized velocities (virtual work).  For a holonomic
system this equals the rotational Euler-Lagrange form with the ``omega x dL/domega``
and ``r_Bj x dL/dr_Bj`` terms, both of which end up inside ``h``.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from ._kernel import evaluate_kernel
from .model import RobotParams, RobotState, leg_angles, leg_rates
from .spatial import E_X, E_Y, cross, leg_chain, skew


class SingularConfigurationError(RuntimeError):
    pass


class DynamicsTerms(NamedTuple):
    M: np.ndarray  # (12, 12)
    h: np.ndarray  # (12,)
    B_j: np.ndarray  # (12, 6)
    B_g: np.ndarray  # (12, 6)


class GeneralizedInputs(NamedTuple):
    """``u_j = [u_PL, u_PR, u_HL, u_HR, kneeacc_L, kneeacc_R]``; ``u_t`` 12-vector; ``u_g`` 6-vector."""

    u_j: np.ndarray
    u_t: np.ndarray
    u_g: np.ndarray


B_J = np.vstack([np.zeros((6, 6)), np.eye(6)])


class Evaluation(NamedTuple):
    """Everything the controller and plant need from one state."""

    R: np.ndarray
    p_B: np.ndarray
    foot_pos: np.ndarray  # (2, 3) inertial
    foot_vel: np.ndarray  # (2, 3)
    J_foot: np.ndarray  # (2, 3, 12) inertial
    foot_bias: np.ndarray  # (2, 3) Jdot v
    thruster_pos: np.ndarray  # (2, 3)
    J_thruster: np.ndarray  # (2, 3, 12)
    M: np.ndarray | None
    h: np.ndarray | None


def evaluate(x: np.ndarray, params: RobotParams, with_dynamics: bool = True) -> Evaluation:
    mp = params.mass
    R, p_B, fp, fv, JF, fb, tp, JT, M, h = evaluate_kernel(
        np.ascontiguousarray(x, dtype=float),
        params.left.packed,
        params.right.packed,
        mp.packed,
        mp.I_B,
        mp.I_H,
        mp.I_K,
        with_dynamics,
    )
    if not with_dynamics:
        M = h = None
    return Evaluation(R, p_B, fp, fv, JF, fb, tp, JT, M, h)


def ground_map(ev: Evaluation) -> np.ndarray:
    """``B_g``: foot-force virtual work on the massive coordinates (12x6)."""
    B_g = np.hstack([ev.J_foot[0].T, ev.J_foot[1].T])
    B_g[10:12, :] = 0.0
    return B_g


def thruster_generalized_force(ev: Evaluation, thrust) -> np.ndarray:
    """Map per-side inertial thrust vectors (2x3) to the 12-vector ``u_t``."""
    thrust = np.asarray(thrust, dtype=float).reshape(2, 3)
    return ev.J_thruster[0].T @ thrust[0] + ev.J_thruster[1].T @ thrust[1]


def dynamics_terms(state: RobotState | np.ndarray, params: RobotParams) -> DynamicsTerms:
    x = state.to_vector() if isinstance(state, RobotState) else np.asarray(state, dtype=float)
    ev = evaluate(x, params)
    return DynamicsTerms(ev.M, ev.h, B_J.copy(), ground_map(ev))


def solve_accel(M: np.ndarray, rhs: np.ndarray, check: bool = True) -> np.ndarray:
    if check:
        cond = np.linalg.cond(M)
        if not np.isfinite(cond) or cond > 1e12:
            raise SingularConfigurationError(f"mass matrix condition number {cond:.3g}")
    return np.linalg.solve(M, rhs)


def forward_dynamics(
    state: RobotState | np.ndarray, inputs: GeneralizedInputs, params: RobotParams
) -> np.ndarray:
    """Generalized acceleration ``a = [omega_dot, q_ddot, phi_k_ddot]`` (length 12)."""
    terms = dynamics_terms(state, params)
    rhs = -terms.h + terms.B_j @ inputs.u_j + inputs.u_t + terms.B_g @ inputs.u_g
    try:
        a = solve_accel(terms.M, rhs)
    except SingularConfigurationError as exc:
        raise SingularConfigurationError(f"{exc} at state {np.asarray(state)!r}") from None
    a[10:12] = np.asarray(inputs.u_j, dtype=float)[4:6]
    return a


def total_energy(state: RobotState | np.ndarray, params: RobotParams) -> tuple[float, float]:
    """Kinetic and potential energy of the massive components."""
    x = state.to_vector() if isinstance(state, RobotState) else np.asarray(state, dtype=float)
    R = x[0:9].reshape(3, 3)
    p_B = x[9:12]
    omega = x[18:21]
    pd_B = x[21:24]
    mp = params.mass
    K = 0.5 * mp.m_B * pd_B @ pd_B + 0.5 * omega @ mp.I_B @ omega
    V = mp.m_B * mp.g * p_B[2]
    for side in ("L", "R"):
        ch = leg_chain(leg_angles(x, side), leg_rates(x, side), params.leg(side))
        gd, hd = leg_rates(x, side)[:2]
        for m, s, sdot in ((mp.m_H, ch.s_H, ch.sdot_H), (mp.m_K, ch.s_K, ch.sdot_K)):
            vel = pd_B + R @ (cross(omega, s) + sdot)
            K += 0.5 * m * vel @ vel
            V += m * mp.g * (p_B + R @ s)[2]
        w_H = ch.R_P.T @ omega + gd * E_X
        Ry = ch.R_P.T @ ch.R_H
        w_K = Ry.T @ (w_H + hd * E_Y)
        K += 0.5 * w_H @ mp.I_H @ w_H + 0.5 * w_K @ mp.I_K @ w_K
    return float(K), float(V)


def state_derivative(x: np.ndarray, accel: np.ndarray) -> np.ndarray:
    """Assemble ``x_dot`` from an acceleration: ``R_dot = R [omega]_x``."""
    R = x[0:9].reshape(3, 3)
    xd = np.empty_like(x)
    xd[0:9] = (R @ skew(x[18:21])).reshape(9)
    xd[9:18] = x[21:30]
    xd[18:30] = accel
    return xd
