"""Dense convex QP: ``min 0.5 u'Pu + c'u  s.t.  A_in u <= b_in``.

Primal active-set method.  An infeasible starting point is handled with a
single elastic slack ``t >= 0`` (``A_in u - t <= b_in``) carrying an exact
linear penalty; the penalty grows until the slack is driven to zero or the
problem is declared infeasible.  Once ``t`` reaches zero the slack is
dropped and the plain active-set iteration continues from a feasible point,
so the true objective never increases from there on.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit

TOL = 1e-8
REG_EIG = 1e-10
REG = 1e-9


class QpStatus(enum.Enum):
    OPTIMAL = "Optimal"
    MAX_ITER = "MaxIter"
    INFEASIBLE = "Infeasible"


@dataclass(eq=False)
class QpProblem:
    P: np.ndarray
    c: np.ndarray
    A_in: np.ndarray | None = None
    b_in: np.ndarray | None = None

    def __post_init__(self):
        self.P = np.atleast_2d(np.asarray(self.P, dtype=float))
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        n = self.c.size
        if self.P.shape != (n, n):
            raise ValueError(f"P must be {n}x{n}, got {self.P.shape}")
        if np.max(np.abs(self.P - self.P.T), initial=0.0) > 1e-9 * max(1.0, np.max(np.abs(self.P))):
            raise ValueError("P must be symmetric")
        if self.A_in is None:
            self.A_in = np.zeros((0, n))
            self.b_in = np.zeros(0)
        self.A_in = np.asarray(self.A_in, dtype=float).reshape(-1, n)
        self.b_in = np.asarray(self.b_in, dtype=float).reshape(-1)
        if self.b_in.size != self.A_in.shape[0]:
            raise ValueError("A_in and b_in row counts differ")

    @property
    def n(self) -> int:
        return self.c.size

    def objective(self, u: np.ndarray) -> float:
        return float(0.5 * u @ self.P @ u + self.c @ u)


@dataclass(eq=False)
class QpSolution:
    u_star: np.ndarray
    objective: float
    status: QpStatus
    iterations: int
    solve_time: float
    multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))
    kkt_residual: float = np.inf
    history: list = field(default_factory=list)  # objective at each feasible iterate

    @property
    def optimal(self) -> bool:
        return self.status is QpStatus.OPTIMAL


def kkt_residuals(problem: QpProblem, u: np.ndarray, y: np.ndarray) -> dict:
    """Scaled stationarity, primal, dual and complementarity residuals."""
    P, c, A, b = problem.P, problem.c, problem.A_in, problem.b_in
    scale_u = 1.0 + np.max(np.abs(u), initial=0.0)
    grad = P @ u + c
    stat_scale = 1.0 + np.max(np.abs(c), initial=0.0) + np.max(np.abs(P), initial=0.0) * scale_u
    slack = A @ u - b
    row_scale = 1.0 + np.max(np.abs(A), initial=0.0) * scale_u + np.max(np.abs(b), initial=0.0)
    return {
        "stationarity": float(np.max(np.abs(grad + A.T @ y), initial=0.0) / stat_scale),
        "primal": float(np.max(slack, initial=0.0) / row_scale) if slack.size else 0.0,
        "dual": float(max(0.0, -np.min(y, initial=0.0)) / stat_scale),
        "complementarity": float(np.max(np.abs(y * slack), initial=0.0) / (stat_scale * row_scale)),
    }


def _regularized(P: np.ndarray) -> np.ndarray:
    """Add ``REG * I`` when the smallest eigenvalue of ``P`` is below ``REG_EIG``."""
    if not P.size:
        return P
    try:
        np.linalg.cholesky(P - REG_EIG * np.eye(P.shape[0]))
    except np.linalg.LinAlgError:
        return P + REG * np.eye(P.shape[0])
    return P


@njit(cache=True)
def _active_set(P, c, A, b, u, working, n_working, max_iter, stop_row, history):
    """Primal active-set iterations from a feasible ``u``.

    ``working[:n_working]`` holds the initial working set.  Stops early once
    ``stop_row`` enters the working set (``stop_row < 0`` disables this).  The
    objective at each distinct iterate is written to ``history``.

    Returns ``(u, working, n_working, y, iterations, n_history, code)`` with
    code 0 optimal, 1 iteration cap, 2 stopped.
    """
    n = u.size
    m = A.shape[0]
    W = np.empty(m + 1, dtype=np.int64)
    nW = n_working
    W[:nW] = working[:n_working]
    y = np.zeros(m)
    u = u.copy()
    n_hist = 0
    f = 0.5 * u @ (P @ u) + c @ u
    history[0] = f
    n_hist = 1
    iters = 0
    while True:
        if stop_row >= 0:
            for j in range(nW):
                if W[j] == stop_row:
                    return u, W, nW, y, iters, n_hist, 2
        if iters >= max_iter:
            return u, W, nW, y, iters, n_hist, 1
        iters += 1
        g = P @ u + c
        K = np.zeros((n + nW, n + nW))
        K[:n, :n] = P
        for j in range(nW):
            K[:n, n + j] = A[W[j]]
            K[n + j, :n] = A[W[j]]
        rhs = np.zeros(n + nW)
        rhs[:n] = -g
        sol = np.linalg.solve(K, rhs)
        p = sol[:n]
        lam = sol[n:]
        if nW >= n:
            p[:] = 0.0  # vertex: the equality-constrained step is zero
        step_scale = 1.0 + np.max(np.abs(u))
        if np.max(np.abs(p)) <= 1e-11 * step_scale:
            if nW == 0 or np.min(lam) >= 0.0:
                for j in range(nW):
                    y[W[j]] = lam[j]
                return u, W, nW, y, iters, n_hist, 0
            drop = int(np.argmin(lam))
            for j in range(drop, nW - 1):
                W[j] = W[j + 1]
            nW -= 1
            continue
        alpha = 1.0
        block = -1
        Ap = A @ p
        ap_tol = 1e-14 * (1.0 + np.max(np.abs(Ap))) if m > 0 else 0.0
        for i in range(m):
            if Ap[i] <= ap_tol:
                continue
            in_w = False
            for j in range(nW):
                if W[j] == i:
                    in_w = True
                    break
            if in_w:
                continue
            ratio = max(0.0, b[i] - A[i] @ u) / Ap[i]
            if ratio < alpha:
                alpha = ratio
                block = i
        u = u + alpha * p
        if block >= 0:
            W[nW] = block
            nW += 1
        f_new = 0.5 * u @ (P @ u) + c @ u
        if f_new != history[n_hist - 1]:
            history[n_hist] = f_new
            n_hist += 1


def solve(
    problem: QpProblem,
    warm_start: np.ndarray | None = None,
    max_iter: int = 100,
    penalty: float | None = None,
) -> QpSolution:
    t0 = time.perf_counter()
    n = problem.n
    A, b = problem.A_in, problem.b_in
    m = A.shape[0]
    P = _regularized(problem.P)
    c = problem.c
    u0 = np.zeros(n) if warm_start is None else np.asarray(warm_start, dtype=float).reshape(n).copy()

    iters = 0
    viol = float(np.max(A @ u0 - b, initial=0.0)) if m else 0.0
    if viol > 0.0:
        # elastic phase: variables z = (u, t), rows [A, -1] z <= b and -t <= 0
        Pz = np.zeros((n + 1, n + 1))
        Pz[:n, :n] = P
        Pz[n, n] = max(1e-6, 1e-6 * np.max(np.abs(P), initial=1.0))
        Az = np.zeros((m + 1, n + 1))
        Az[:m, :n] = A
        Az[:m, n] = -1.0
        Az[m, n] = -1.0
        bz = np.concatenate([b, [0.0]])
        M = penalty if penalty is not None else 1e3 * (1.0 + np.max(np.abs(c)) + np.max(np.abs(P)))
        working = np.array([int(np.argmax(A @ u0 - b))], dtype=np.int64)
        z = np.concatenate([u0, [viol]])
        status = "infeasible"
        scratch = np.empty(max_iter + 2)
        while M < 1e16:
            cz = np.concatenate([c, [M]])
            z, W, nW, _, k, _, code = _active_set(Pz, cz, Az, bz, z, working, working.size, max_iter - iters, m, scratch)
            iters += k
            working = W[:nW].copy()
            if code == 2:
                status = "feasible"
                break
            if code == 1:
                status = "maxiter"
                break
            M *= 100.0
        tol_feas = TOL * (1.0 + np.max(np.abs(b)))
        if status != "feasible":
            u = z[:n]
            st = QpStatus.MAX_ITER if status == "maxiter" else QpStatus.INFEASIBLE
            if status == "infeasible" and z[n] <= tol_feas:
                st = QpStatus.MAX_ITER
            return QpSolution(u, problem.objective(u), st, iters, time.perf_counter() - t0)
        u0 = z[:n].copy()
        working = working[working < m]
    else:
        working = np.zeros(0, dtype=np.int64)

    history = np.empty(max_iter - iters + 2)
    u, _, _, y, k, n_hist, code = _active_set(P, c, A, b, u0, working, working.size, max_iter - iters, -1, history)
    iters += k
    res_d = kkt_residuals(problem, u, y)
    status = QpStatus.OPTIMAL if code == 0 else QpStatus.MAX_ITER
    return QpSolution(
        u_star=u,
        objective=problem.objective(u),
        status=status,
        iterations=iters,
        solve_time=time.perf_counter() - t0,
        multipliers=y,
        kkt_residual=max(res_d.values()),
        history=[float(h) for h in history[:n_hist]],
    )
