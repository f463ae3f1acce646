"""Robot state layout and physical parameters."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .spatial import LegGeometry

# flat state layout: r_B (row-major R_B), q, phi_k, omega_B, q_dot, phi_k_dot
R_SLICE = slice(0, 9)
Q_SLICE = slice(9, 16)
PHIK_SLICE = slice(16, 18)
OMEGA_SLICE = slice(18, 21)
QD_SLICE = slice(21, 28)
PHIKD_SLICE = slice(28, 30)
VEL_SLICE = slice(18, 30)
STATE_DIM = 30
NV = 12

# generalized velocity / acceleration indices
I_OMEGA = slice(0, 3)
I_POS = slice(3, 6)
I_GAMMA = (6, 7)
I_PHIH = (8, 9)
I_PHIK = (10, 11)
# (gamma_h, phi_h, phi_k) coordinates of each leg
LEG_INDEX = {"L": (6, 8, 10), "R": (7, 9, 11)}


@dataclass
class RobotState:
    """Full dynamic state; ``q = [p_B, gamma_hL, gamma_hR, phi_hL, phi_hR]``."""

    R: np.ndarray
    q: np.ndarray
    phi_k: np.ndarray
    omega: np.ndarray = field(default_factory=lambda: np.zeros(3))
    q_dot: np.ndarray = field(default_factory=lambda: np.zeros(7))
    phi_k_dot: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def to_vector(self) -> np.ndarray:
        return np.concatenate(
            [
                np.asarray(self.R, dtype=float).reshape(9),
                self.q,
                self.phi_k,
                self.omega,
                self.q_dot,
                self.phi_k_dot,
            ]
        ).astype(float)

    @classmethod
    def from_vector(cls, x) -> "RobotState":
        x = np.asarray(x, dtype=float)
        if x.shape != (STATE_DIM,):
            raise ValueError(f"state vector must have length {STATE_DIM}, got {x.shape}")
        return cls(
            R=x[R_SLICE].reshape(3, 3).copy(),
            q=x[Q_SLICE].copy(),
            phi_k=x[PHIK_SLICE].copy(),
            omega=x[OMEGA_SLICE].copy(),
            q_dot=x[QD_SLICE].copy(),
            phi_k_dot=x[PHIKD_SLICE].copy(),
        )

    @property
    def p_B(self) -> np.ndarray:
        return self.q[0:3]

    def leg_angles(self, side: str):
        i = 0 if side == "L" else 1
        return (self.q[3 + i], self.q[5 + i], self.phi_k[i])

    def velocity(self) -> np.ndarray:
        return np.concatenate([self.omega, self.q_dot, self.phi_k_dot])


def leg_angles(x: np.ndarray, side: str):
    i = 0 if side == "L" else 1
    return (x[12 + i], x[14 + i], x[16 + i])


def leg_rates(x: np.ndarray, side: str):
    i = 0 if side == "L" else 1
    return (x[24 + i], x[26 + i], x[28 + i])


@dataclass(frozen=True, eq=False)
class MassProperties:
    m_B: float = 4.0
    m_H: float = 0.5
    m_K: float = 0.5
    I_B: np.ndarray = field(default_factory=lambda: 1e-3 * np.eye(3))
    I_H: np.ndarray = field(default_factory=lambda: 1e-4 * np.eye(3))
    I_K: np.ndarray = field(default_factory=lambda: 1e-4 * np.eye(3))
    g: float = 9.81

    def __post_init__(self):
        for name in ("I_B", "I_H", "I_K"):
            val = np.asarray(getattr(self, name), dtype=float)
            if val.ndim == 0:
                val = float(val) * np.eye(3)
            object.__setattr__(self, name, val)
            if np.max(np.abs(val - val.T)) > 1e-12 or np.min(np.linalg.eigvalsh(val)) < 0.0:
                raise ValueError(f"{name} must be symmetric positive semidefinite")
        if min(self.m_B, self.m_H, self.m_K) <= 0.0:
            raise ValueError("masses must be positive")

    @cached_property
    def packed(self) -> np.ndarray:
        return np.array([self.m_B, self.m_H, self.m_K, self.g])

    @property
    def total_mass(self) -> float:
        return self.m_B + 2.0 * (self.m_H + self.m_K)


@dataclass(frozen=True, eq=False)
class GroundParams:
    """Compliant ground and Stribeck friction; ``slope_alpha`` in radians."""

    k_gp: float = 8000.0
    k_gd: float = 268.0
    mu_s: float = 0.8
    mu_c: float = 0.64
    mu_v: float = 0.8
    v_s: float = 0.1
    slope_alpha: float = math.radians(30.0)

    def __post_init__(self):
        if self.k_gp <= 0 or self.k_gd < 0:
            raise ValueError("ground needs k_gp > 0 and k_gd >= 0")
        if not (self.mu_s >= self.mu_c > 0):
            raise ValueError("friction needs mu_s >= mu_c > 0")
        if self.v_s <= 0:
            raise ValueError("Stribeck velocity must be positive")

    def slope_rotation(self) -> np.ndarray:
        """Rotation from the slope-aligned frame to the inertial frame."""
        c, s = math.cos(self.slope_alpha), math.sin(self.slope_alpha)
        # Ry(-alpha): slope x-axis points up the incline
        return np.array([[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]])


@dataclass(frozen=True, eq=False)
class RobotParams:
    left: LegGeometry = field(default_factory=LegGeometry)
    mass: MassProperties = field(default_factory=MassProperties)
    ground: GroundParams = field(default_factory=GroundParams)

    @cached_property
    def right(self) -> LegGeometry:
        return self.left.mirrored()

    def leg(self, side: str) -> LegGeometry:
        return self.left if side == "L" else self.right
