"""Whole-body mapping from the ROM force plan to thrust and stance torques."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .dynamics import B_J
from .model import LEG_INDEX
from .rom import RomParams

# generalized-velocity index of each constrainable planar coordinate
PLANAR_COORDS = {"y": 4, "roll": 0, "pitch": 1, "yaw": 2}
PLANAR_DEFAULT = ("y", "roll", "yaw")


class SingularStanceError(RuntimeError):
    pass


def thruster_from_rom(desired_accel, lam, params: RomParams) -> tuple[float, float]:
    """Thrust (slope frame) that realizes the desired ROM acceleration."""
    xdd, zdd = desired_accel
    lx, lz = lam
    m, g, a = params.m, params.g, params.alpha
    return m * xdd + m * g * math.sin(a) + lx, m * zdd + m * g * math.cos(a) - lz


def planar_jacobian(coords=PLANAR_DEFAULT) -> np.ndarray:
    J = np.zeros((len(coords), 12))
    for r, name in enumerate(coords):
        J[r, PLANAR_COORDS[name]] = 1.0
    return J


def selection_matrices(stance: str) -> tuple[np.ndarray, np.ndarray]:
    """``S_st``, ``S_sw`` (6x3) mapping (gamma_h, phi_h, phi_k) of a leg into ``u_j``."""

    def sel(side):
        S = np.zeros((6, 3))
        base = 0 if side == "L" else 1
        for j, row in enumerate((base, 2 + base, 4 + base)):
            S[row, j] = 1.0
        return S

    swing = "R" if stance == "L" else "L"
    return sel(stance), sel(swing)


def embed_ground_force(force_world: np.ndarray, stance: str) -> np.ndarray:
    u_g = np.zeros(6)
    i = 0 if stance == "L" else 1
    u_g[3 * i:3 * i + 3] = force_world
    return u_g


@dataclass(eq=False)
class WbcProblem:
    M: np.ndarray
    h: np.ndarray
    B_g: np.ndarray
    J_s: np.ndarray
    Jdot_s_v: np.ndarray  # Jdot_s @ v
    J_c: np.ndarray
    S_st: np.ndarray
    S_sw: np.ndarray
    u_sw: np.ndarray
    u_t: np.ndarray
    u_g: np.ndarray
    B_j: np.ndarray = field(default_factory=lambda: B_J.copy())


class WbcSolution(NamedTuple):
    qdd: np.ndarray
    u_st: np.ndarray
    lambda_c: np.ndarray
    residuals: tuple[float, float, float]  # dynamics, contact, planar


def wbc_residuals(problem: WbcProblem, qdd, u_st, lambda_c) -> tuple[float, float, float]:
    p = problem
    dyn = (
        p.M @ qdd
        + p.h
        - p.B_j @ (p.S_st @ u_st + p.S_sw @ p.u_sw)
        - p.u_t
        - p.B_g @ p.u_g
        - p.J_c.T @ lambda_c
    )
    contact = p.J_s @ qdd + p.Jdot_s_v
    planar = p.J_c @ qdd
    return (
        float(np.max(np.abs(dyn))),
        float(np.max(np.abs(contact))),
        float(np.max(np.abs(planar), initial=0.0)),
    )


def stance_torque(problem: WbcProblem, cond_limit: float = 1e12) -> WbcSolution:
    """Solve the block KKT system for accelerations, stance inputs and planar forces."""
    p = problem
    n = p.M.shape[0]
    ns = p.S_st.shape[1]
    nc = p.J_c.shape[0]
    k = p.J_s.shape[0]
    dim = n + ns + nc
    K = np.zeros((n + k + nc, dim))
    K[:n, :n] = p.M
    K[:n, n:n + ns] = -p.B_j @ p.S_st
    K[:n, n + ns:] = -p.J_c.T
    K[n:n + k, :n] = p.J_s
    K[n + k:, :n] = p.J_c
    rhs = np.concatenate(
        [
            -p.h + p.B_j @ p.S_sw @ p.u_sw + p.u_t + p.B_g @ p.u_g,
            -p.Jdot_s_v,
            np.zeros(nc),
        ]
    )
    if K.shape[0] != K.shape[1]:
        raise SingularStanceError(f"KKT system is {K.shape[0]}x{K.shape[1]}, not square")
    cond = np.linalg.cond(K)
    if not np.isfinite(cond) or cond > cond_limit:
        raise SingularStanceError(f"KKT condition number {cond:.3g}")
    sol = np.linalg.solve(K, rhs)
    qdd, u_st, lam_c = sol[:n], sol[n:n + ns], sol[n + ns:]
    return WbcSolution(qdd, u_st, lam_c, wbc_residuals(p, qdd, u_st, lam_c))


def stance_joint_indices(stance: str) -> tuple[int, int, int]:
    return LEG_INDEX[stance]


@dataclass(eq=False)
class ControlCommand:
    """Held by the plant between controller ticks."""

    u_j: np.ndarray  # (6,) [u_PL, u_PR, u_HL, u_HR, kneeacc_L, kneeacc_R]
    thrust: np.ndarray  # (2, 3) per-side inertial thrust, N
    u_st: np.ndarray = field(default_factory=lambda: np.zeros(3))
    u_sw: np.ndarray = field(default_factory=lambda: np.zeros(3))
    lambda_c: np.ndarray = field(default_factory=lambda: np.zeros(0))
    lambda_plan: np.ndarray = field(default_factory=lambda: np.zeros(2))
    thrust_slope: np.ndarray = field(default_factory=lambda: np.zeros(2))

    @classmethod
    def zero(cls) -> "ControlCommand":
        return cls(np.zeros(6), np.zeros((2, 3)))
