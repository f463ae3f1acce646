"""Condensed receding-horizon QP over the ROM contact forces."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .qp import QpProblem, QpSolution, solve
from .rom import RomLinearization, RomState

NX = 2
NU = 2


@dataclass(frozen=True, eq=False)
class MpcConfig:
    N: int = 10
    dt: float = 0.01
    Q: np.ndarray = field(default_factory=lambda: np.diag([3.0e5, 2.0e3]))
    R: np.ndarray = field(default_factory=lambda: np.eye(2))
    mu: float = 0.6
    lambda_min: float = 5.0
    constraint_form: str = "cone"

    def __post_init__(self):
        object.__setattr__(self, "Q", np.asarray(self.Q, dtype=float).reshape(2, 2))
        object.__setattr__(self, "R", np.asarray(self.R, dtype=float).reshape(2, 2))
        if self.N < 1:
            raise ValueError("horizon must be at least 1")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        for name in ("Q", "R"):
            W = getattr(self, name)
            if np.max(np.abs(W - W.T)) > 1e-12 or np.linalg.eigvalsh(W)[0] < -1e-12:
                raise ValueError(f"{name} must be symmetric positive semidefinite")
        if self.mu <= 0 or self.lambda_min < 0:
            raise ValueError("cone needs mu > 0 and lambda_min >= 0")
        if self.constraint_form not in ("cone", "box"):
            raise ValueError("constraint_form must be 'cone' or 'box'")

    @property
    def bounds(self) -> "ConeBounds":
        return ConeBounds(self.mu, self.lambda_min)


class ConeBounds(NamedTuple):
    mu: float
    lambda_min: float


@dataclass(eq=False)
class CondensedQp:
    F: np.ndarray
    G: np.ndarray
    X_d: np.ndarray
    qp: QpProblem


class MpcResult(NamedTuple):
    plan: np.ndarray  # (N, 2) rows (lambda_x, lambda_z)
    first: np.ndarray
    solution: QpSolution
    condensed: CondensedQp


def prediction_matrices(A_d: np.ndarray, B_d: np.ndarray, N: int) -> tuple[np.ndarray, np.ndarray]:
    nx, nu = B_d.shape
    F = np.zeros(((N + 1) * nx, nx))
    G = np.zeros(((N + 1) * nx, N * nu))
    Ak = np.eye(nx)
    powers = [Ak]
    for k in range(N + 1):
        F[k * nx:(k + 1) * nx] = Ak
        Ak = A_d @ Ak
        powers.append(Ak)
    for k in range(1, N + 1):
        for j in range(k):
            G[k * nx:(k + 1) * nx, j * nu:(j + 1) * nu] = powers[k - 1 - j] @ B_d
    return F, G


def block_weights(Q: np.ndarray, R: np.ndarray, N: int) -> tuple[np.ndarray, np.ndarray]:
    return np.kron(np.eye(N + 1), Q), np.kron(np.eye(N), R)


def condensed_cost(F, G, Q_bar, R_bar, x0, X_d) -> tuple[np.ndarray, np.ndarray]:
    """``P = G'QG + R`` and ``c = G'Q(F x0 - X_d)``; the QP objective is ``0.5 u'Pu + c'u``.

    Up to a constant, ``0.5 u'Pu + c'u`` is half the stacked tracking cost
    ``sum |x_k - x_dk|_Q^2 + |u_k|_R^2``.
    """
    GQ = G.T @ Q_bar
    P = GQ @ G + R_bar
    P = 0.5 * (P + P.T)
    c = GQ @ (F @ np.asarray(x0, dtype=float) - np.asarray(X_d, dtype=float).reshape(-1))
    return P, c


def cone_constraints(N: int, bounds: ConeBounds) -> tuple[np.ndarray, np.ndarray]:
    mu, lmin = bounds
    block = np.array([[1.0, -mu], [-1.0, -mu], [0.0, -1.0]])
    A_in = np.kron(np.eye(N), block)
    b_in = np.tile([0.0, 0.0, -lmin], N)
    return A_in, b_in


def box_constraints(N: int, bounds: ConeBounds, lambda_z_prev: float) -> tuple[np.ndarray, np.ndarray]:
    """``u_l <= u <= u_u`` with the tangential box sized from the last normal force."""
    mu, lmin = bounds
    lz = max(lambda_z_prev, lmin)
    upper = np.tile([mu * lz, np.inf], N)
    lower = np.tile([-mu * lz, lmin], N)
    I = np.eye(2 * N)
    A_in = np.vstack([I, -I])
    b_in = np.concatenate([upper, -lower])
    keep = np.isfinite(b_in)
    return A_in[keep], b_in[keep]


def build(x0, X_d, lin: RomLinearization, config: MpcConfig, lambda_z_prev: float | None = None) -> CondensedQp:
    F, G = prediction_matrices(lin.A_d, lin.B_d, config.N)
    Q_bar, R_bar = block_weights(config.Q, config.R, config.N)
    P, c = condensed_cost(F, G, Q_bar, R_bar, x0, X_d)
    if config.constraint_form == "cone":
        A_in, b_in = cone_constraints(config.N, config.bounds)
    else:
        lz = lin.op_point[0] if lambda_z_prev is None else lambda_z_prev
        A_in, b_in = box_constraints(config.N, config.bounds, lz)
    return CondensedQp(F, G, np.asarray(X_d, dtype=float).reshape(-1), QpProblem(P, c, A_in, b_in))


def shift_plan(plan: np.ndarray) -> np.ndarray:
    """Previous plan advanced one step, last input repeated."""
    plan = np.asarray(plan, dtype=float)
    return np.vstack([plan[1:], plan[-1:]])


def mpc_step(
    rom_state: RomState | np.ndarray,
    reference,
    lin: RomLinearization,
    config: MpcConfig,
    solver: Callable[..., QpSolution] = solve,
    previous_plan: np.ndarray | None = None,
) -> MpcResult:
    """Solve one tick; ``reference`` is the stacked ``X_d`` of shape ``(N+1, 2)``.

    The state is taken relative to the stance foot when given as a RomState.
    """
    if isinstance(rom_state, RomState):
        x0 = np.array([rom_state.x - rom_state.c_x, rom_state.x_dot])
    else:
        x0 = np.asarray(rom_state, dtype=float)
    cq = build(x0, reference, lin, config)
    warm = None if previous_plan is None else shift_plan(previous_plan).reshape(-1)
    sol = solver(cq.qp, warm_start=warm)
    plan = sol.u_star.reshape(config.N, NU)
    return MpcResult(plan, plan[0].copy(), sol, cq)
