"""Self-check suites comparing the implementation against independent oracles.

Each suite returns a list of :class:`CheckResult`; a suite passes when every
residual is at or below its tolerance.
"""

from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np
from scipy.linalg import expm
from scipy.spatial.transform import Rotation

from . import mpc, oracles, qp, rom
from .dynamics import GeneralizedInputs, evaluate, forward_dynamics, thruster_generalized_force
from .model import RobotParams
from .spatial import point_jacobian


class CheckResult(NamedTuple):
    suite: str
    name: str
    value: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value <= self.tol)

    def line(self) -> str:
        flag = "ok  " if self.passed else "FAIL"
        return f"[{flag}] {self.suite}.{self.name}: {self.value:.3e} (tol {self.tol:.0e})"


def random_state(rng: np.random.Generator) -> np.ndarray:
    """Random attitude, configuration and velocities (not necessarily physical)."""
    x = np.zeros(30)
    x[0:9] = Rotation.random(random_state=rng).as_matrix().reshape(9)
    x[9:18] = rng.uniform(-1.0, 1.0, 9)
    x[11] += 1.0
    x[18:30] = rng.uniform(-2.0, 2.0, 12)
    return x


def _oracle_point_key(point: str) -> str:
    name, side = point.split("_")
    return {"foot": "F", "hip": "H", "knee": "K", "thruster": "T"}[name] + side


def dynamics_suite(seed: int = 0, n_states: int = 5, params: RobotParams | None = None) -> list[CheckResult]:
    params = params or RobotParams()
    rng = np.random.default_rng(seed)
    asym = accel_err = jac_err = bias_err = 0.0
    for _ in range(n_states):
        x = random_state(rng)
        ev = evaluate(x, params)
        asym = max(asym, float(np.max(np.abs(ev.M - ev.M.T))))
        u_j = rng.normal(size=6)
        feet = 10.0 * rng.normal(size=(2, 3))
        thrust = 10.0 * rng.normal(size=(2, 3))
        inputs = GeneralizedInputs(u_j, thruster_generalized_force(ev, thrust), feet.reshape(6))
        a = forward_dynamics(x, inputs, params)
        ref = oracles.lagrange_accel(x, params, u_j[:4], feet, thrust)
        accel_err = max(accel_err, float(np.max(np.abs(a[:10] - ref)) / np.max(np.abs(ref))))

        R = x[0:9].reshape(3, 3)
        for point in ("foot_L", "foot_R", "knee_L", "thruster_R"):
            J, Jdot = point_jacobian(x, params, point)
            key = _oracle_point_key(point)
            J_ref = np.zeros((3, 12))
            for i in range(12):
                v = np.zeros(12)
                v[i] = 1.0
                J_ref[:, i] = oracles.velocities(R, x[9:16], x[16:18], v[0:3], v[3:10], v[10:12], params)[key][0]
            jac_err = max(jac_err, float(np.max(np.abs(J - J_ref))))

            def Jv(h, point=point):
                xs = x.copy()
                xs[0:9] = (R @ expm(h * oracles.hat(x[18:21]))).reshape(9)
                xs[9:18] += h * x[21:30]
                return point_jacobian(xs, params, point)[0] @ x[18:30]

            h = 1e-6
            bias_err = max(bias_err, float(np.max(np.abs(Jdot @ x[18:30] - (Jv(h) - Jv(-h)) / (2 * h)))))
    return [
        CheckResult("dynamics", "mass_matrix_asymmetry", asym, 1e-9),
        CheckResult("dynamics", "forward_dynamics_vs_lagrangian_rel", accel_err, 1e-6),
        CheckResult("dynamics", "point_jacobian_vs_complex_step", jac_err, 1e-9),
        CheckResult("dynamics", "jacobian_rate_vs_finite_difference", bias_err, 1e-5),
    ]


def rom_suite(seed: int = 0, n_points: int = 20) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    err_A = err_B = err_d = 0.0
    h = 1e-6
    for _ in range(n_points):
        params = rom.RomParams(m=rng.uniform(2, 10), z0=rng.uniform(0.3, 1.0))
        lz0, x0, c0 = rng.uniform(5, 80), rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)
        xd0, lx0 = rng.uniform(-1, 1), rng.uniform(-10, 10)
        A, B = rom.linearize((lz0, x0, c0), params)

        def f(x, xd, lx, lz):
            return np.array([xd, rom.lip_accel(rom.RomState(x, xd, c0), (lx, lz), params)])

        A_fd = np.column_stack(
            [
                (f(x0 + h, xd0, lx0, lz0) - f(x0 - h, xd0, lx0, lz0)) / (2 * h),
                (f(x0, xd0 + h, lx0, lz0) - f(x0, xd0 - h, lx0, lz0)) / (2 * h),
            ]
        )
        B_fd = np.column_stack(
            [
                (f(x0, xd0, lx0 + h, lz0) - f(x0, xd0, lx0 - h, lz0)) / (2 * h),
                (f(x0, xd0, lx0, lz0 + h) - f(x0, xd0, lx0, lz0 - h)) / (2 * h),
            ]
        )
        err_A = max(err_A, float(np.max(np.abs(A - A_fd))))
        err_B = max(err_B, float(np.max(np.abs(B - B_fd))))
        dt = rng.uniform(1e-3, 5e-2)
        A_d, B_d = rom.discretize(A, B, dt)
        err_d = max(err_d, float(np.max(np.abs(A_d - (np.eye(2) + dt * A)))), float(np.max(np.abs(B_d - dt * B))))
    return [
        CheckResult("rom", "A_vs_finite_difference", err_A, 1e-6),
        CheckResult("rom", "B_vs_finite_difference", err_B, 1e-6),
        CheckResult("rom", "forward_euler_discretization", err_d, 1e-12),
    ]


def expanded_objective(x0, X_d, U, lin: rom.RomLinearization, config: mpc.MpcConfig) -> float:
    """``0.5 * sum |x_k - x_dk|_Q^2 + |u_k|_R^2`` by explicit rollout."""
    x = np.asarray(x0, dtype=float)
    X_d = np.asarray(X_d, dtype=float).reshape(-1, 2)
    U = np.asarray(U, dtype=float).reshape(-1, 2)
    total = 0.0
    for k in range(config.N + 1):
        e = x - X_d[k]
        total += e @ config.Q @ e
        if k < config.N:
            total += U[k] @ config.R @ U[k]
            x = lin.A_d @ x + lin.B_d @ U[k]
    return 0.5 * total


def mpc_suite(seed: int = 0, n_instances: int = 20) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    roll_err = obj_err = 0.0
    for _ in range(n_instances):
        N = int(rng.integers(1, 16))
        config = mpc.MpcConfig(N=N)
        params = rom.RomParams()
        lin = rom.linearization((rng.uniform(5, 60), rng.uniform(-0.2, 0.2), 0.0), params, config.dt)
        x0 = rng.normal(size=2)
        U = rng.normal(size=(N, 2)) * 10
        F, G = mpc.prediction_matrices(lin.A_d, lin.B_d, N)
        X = (F @ x0 + G @ U.reshape(-1)).reshape(N + 1, 2)
        x = x0.copy()
        for k in range(N + 1):
            scale = 1.0 + np.max(np.abs(x))
            roll_err = max(roll_err, float(np.max(np.abs(X[k] - x)) / scale))
            if k < N:
                x = lin.A_d @ x + lin.B_d @ U[k]
        X_d = rng.normal(size=(N + 1, 2))
        cq = mpc.build(x0, X_d, lin, config)
        e0 = F @ x0 - X_d.reshape(-1)
        Q_bar, _ = mpc.block_weights(config.Q, config.R, N)
        condensed = cq.qp.objective(U.reshape(-1)) + 0.5 * e0 @ Q_bar @ e0
        expanded = expanded_objective(x0, X_d, U, lin, config)
        obj_err = max(obj_err, abs(condensed - expanded) / max(1.0, abs(expanded)))
    return [
        CheckResult("mpc", "prediction_vs_rollout", roll_err, 1e-12),
        CheckResult("mpc", "condensed_vs_expanded_objective_rel", obj_err, 1e-9),
    ]


def random_qp(rng: np.random.Generator, n_max: int = 10, m_max: int = 20) -> qp.QpProblem:
    """Strictly convex QP with a known interior point."""
    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers(1, m_max + 1))
    L = rng.normal(size=(n, n))
    P = L @ L.T + 0.1 * np.eye(n)
    c = 5.0 * rng.normal(size=n)
    A = rng.normal(size=(m, n))
    b = A @ rng.normal(size=n) + rng.uniform(0.0, 1.0, m)
    return qp.QpProblem(P, c, A, b)


def qp_suite(seed: int = 0, n_problems: int = 100, solver: Callable = qp.solve) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    gap = feas = 0.0
    not_optimal = 0
    for _ in range(n_problems):
        prob = random_qp(rng)
        sol = solver(prob)
        _, _, dual = oracles.dual_projected_gradient(prob.P, prob.c, prob.A_in, prob.b_in)
        gap = max(gap, abs(sol.objective - dual))
        if sol.optimal:
            feas = max(feas, float(np.max(prob.A_in @ sol.u_star - prob.b_in, initial=0.0)))
        else:
            not_optimal += 1
    return [
        CheckResult("qp", "objective_gap_vs_dual_oracle", gap, 1e-6),
        CheckResult("qp", "optimal_primal_infeasibility", feas, 1e-8),
        CheckResult("qp", "non_optimal_count", float(not_optimal), 0.0),
    ]


SUITES: dict[str, Callable[..., list[CheckResult]]] = {
    "dynamics": dynamics_suite,
    "rom": rom_suite,
    "mpc": mpc_suite,
    "qp": qp_suite,
}


def run_suite(name: str, seed: int = 0) -> list[CheckResult]:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    return SUITES[name](seed=seed)
