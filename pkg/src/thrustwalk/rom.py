"""Planar variable-length inverted pendulum on a slope.

Everything here lives in the slope-aligned sagittal plane.  ``lambda = (lx, lz)``
is the contact force in the pendulum convention: the stance foot pushes the
mass with ``-lx`` along x and ``+lz`` along z.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


@dataclass(frozen=True)
class RomParams:
    m: float = 6.0
    z0: float = 0.6
    alpha: float = math.radians(30.0)
    g: float = 9.81

    def __post_init__(self):
        if self.m <= 0 or self.z0 <= 0:
            raise ValueError("ROM needs m > 0 and z0 > 0")


class RomState(NamedTuple):
    x: float  # P_Bx
    x_dot: float
    c_x: float  # stance foot / CoP

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.x, self.x_dot])


@dataclass(frozen=True, eq=False)
class RomLinearization:
    A: np.ndarray
    B: np.ndarray
    A_d: np.ndarray
    B_d: np.ndarray
    op_point: tuple[float, float, float]  # (lambda_z0, P_Bx0, c_x0)
    dt: float


def vlip_accel(state: RomState, lam, u_t, params: RomParams) -> tuple[float, float]:
    lx, lz = lam
    utx, utz = u_t
    m, g, a = params.m, params.g, params.alpha
    xdd = (-m * g * math.sin(a) + utx - lx) / m
    zdd = (-m * g * math.cos(a) + utz + lz) / m
    return xdd, zdd


def lip_accel(state: RomState, lam, params: RomParams) -> float:
    lx, lz = lam
    return -lz * (state.c_x - state.x) / (params.m * params.z0) - lx / params.m


def linearize(op_point, params: RomParams) -> tuple[np.ndarray, np.ndarray]:
    lz0, x0, c0 = op_point
    m, z0 = params.m, params.z0
    A = np.array([[0.0, 1.0], [lz0 / (m * z0), 0.0]])
    B = np.array([[0.0, 0.0], [-1.0 / m, (x0 - c0) / (m * z0)]])
    return A, B


def discretize(A: np.ndarray, B: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    A = np.asarray(A, dtype=float)
    return np.eye(A.shape[0]) + A * dt, np.asarray(B, dtype=float) * dt


def linearization(op_point, params: RomParams, dt: float) -> RomLinearization:
    A, B = linearize(op_point, params)
    A_d, B_d = discretize(A, B, dt)
    return RomLinearization(A, B, A_d, B_d, tuple(float(v) for v in op_point), dt)
