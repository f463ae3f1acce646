import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thrustwalk import checks, mpc, qp, rom
from thrustwalk.mpc import (
    ConeBounds,
    MpcConfig,
    block_weights,
    box_constraints,
    condensed_cost,
    cone_constraints,
    mpc_step,
    prediction_matrices,
    shift_plan,
)

ROM = rom.RomParams(m=6.0, z0=0.55)


def _lin(lz=50.0, x0=0.02, c0=0.0, dt=0.01):
    return rom.linearization((lz, x0, c0), ROM, dt)


def _ramp(N, v=0.375, start=0.0, dt=0.01, offset=0.0):
    k = np.arange(N + 1) + start
    return np.column_stack([offset + v * dt * k, np.full(N + 1, v)])


def test_single_step_prediction():
    A_d, B_d = np.array([[1.0, 0.01], [0.2, 1.0]]), np.array([[0.0, 0.0], [-0.1, 0.03]])
    F, G = prediction_matrices(A_d, B_d, 1)
    assert np.array_equal(F, np.vstack([np.eye(2), A_d]))
    assert np.array_equal(G, np.vstack([np.zeros((2, 2)), B_d]))


def test_integrator_chain():
    _, G = prediction_matrices(np.eye(2), np.eye(2), 3)
    u = np.arange(6.0)
    X = (G @ u).reshape(4, 2)
    for k in range(4):
        assert np.array_equal(X[k], u.reshape(3, 2)[:k].sum(axis=0))


@settings(max_examples=30)
@given(N=st.integers(1, 20), seed=st.integers(0, 2**31))
def test_prediction_matches_rollout(N, seed):
    rng = np.random.default_rng(seed)
    A_d, B_d = rng.normal(size=(2, 2)) * 0.5 + np.eye(2), rng.normal(size=(2, 2))
    F, G = prediction_matrices(A_d, B_d, N)
    x0, U = rng.normal(size=2), rng.normal(size=(N, 2))
    X = (F @ x0 + G @ U.reshape(-1)).reshape(N + 1, 2)
    x = x0.copy()
    for k in range(N + 1):
        assert np.max(np.abs(X[k] - x)) <= 1e-12 * (1 + np.max(np.abs(x)))
        if k < N:
            x = A_d @ x + B_d @ U[k]


@settings(max_examples=20)
@given(N=st.integers(1, 20))
def test_G_block_structure(N):
    lin = _lin()
    _, G = prediction_matrices(lin.A_d, lin.B_d, N)
    assert not np.any(G[0:2])
    for k in range(1, N + 1):
        for j in range(N):
            block = G[2 * k:2 * k + 2, 2 * j:2 * j + 2]
            if j < k:
                assert np.allclose(block, np.linalg.matrix_power(lin.A_d, k - 1 - j) @ lin.B_d, rtol=0, atol=1e-14)
            else:
                assert not np.any(block)


def test_zero_tracking_error_gives_zero_linear_term():
    lin = _lin()
    N = 5
    F, G = prediction_matrices(lin.A_d, lin.B_d, N)
    Q_bar, R_bar = block_weights(np.diag([3e5, 2e3]), np.eye(2), N)
    x_d0 = np.array([0.01, 0.2])
    _, c = condensed_cost(F, G, Q_bar, R_bar, x_d0, F @ x_d0)
    assert np.max(np.abs(c)) == 0.0


def test_linear_term_reduces_to_initial_error_form():
    lin = _lin()
    N = 4
    F, G = prediction_matrices(lin.A_d, lin.B_d, N)
    Q_bar, R_bar = block_weights(np.diag([3e5, 2e3]), np.eye(2), N)
    x0, x_d0 = np.array([0.03, 0.1]), np.array([0.0, 0.3])
    _, c = condensed_cost(F, G, Q_bar, R_bar, x0, F @ x_d0)
    assert np.allclose(c, (x0 - x_d0) @ F.T @ Q_bar @ G, rtol=1e-12, atol=0)


def test_one_step_deadbeat():
    F, G = prediction_matrices(np.eye(1), np.eye(1), 1)
    Q_bar, R_bar = np.eye(2), np.zeros((1, 1))
    P, c = condensed_cost(F, G, Q_bar, R_bar, np.zeros(1), np.array([1.0, 1.0]))
    sol = qp.solve(qp.QpProblem(P, c))
    assert sol.u_star[0] == pytest.approx(1.0, abs=1e-12)


def test_condensed_objective_matches_expanded_sum():
    results = checks.mpc_suite(seed=11)
    assert all(r.passed for r in results), [r.line() for r in results]


def test_unconstrained_minimizer_matches_expanded_form(rng):
    cfg = MpcConfig(N=6)
    lin = _lin()
    x0 = np.array([0.02, 0.1])
    X_d = _ramp(cfg.N)
    cq = mpc.build(x0, X_d, lin, cfg)
    u_star = np.linalg.solve(cq.qp.P, -cq.qp.c)
    best = checks.expanded_objective(x0, X_d, u_star, lin, cfg)
    for _ in range(20):
        du = rng.normal(size=u_star.size) * 1e-3
        assert checks.expanded_objective(x0, X_d, u_star + du, lin, cfg) >= best


def test_cone_rows_at_apex():
    A, b = cone_constraints(1, ConeBounds(0.6, 5.0))
    r = A @ [0.0, 5.0] - b
    assert np.all(r <= 0) and r[2] == 0.0


def test_cone_rows_detect_boundary_violation():
    A, b = cone_constraints(2, ConeBounds(0.6, 5.0))
    eps = 1e-3
    u = np.array([0.6 * 20 + eps, 20.0, 0.0, 20.0])
    r = A @ u - b
    assert r[0] == pytest.approx(eps, abs=1e-12)
    assert np.all(r[1:] <= 0)


def test_box_rows_use_previous_normal_force():
    A, b = box_constraints(1, ConeBounds(0.5, 5.0), 40.0)
    assert np.all(A @ [20.0, 40.0] - b <= 1e-12)
    assert np.any(A @ [20.5, 40.0] - b > 0)
    assert np.any(A @ [0.0, 4.0] - b > 0)


def test_on_reference_needs_no_tangential_force():
    cfg = MpcConfig()
    lin = _lin(lz=50.0, x0=0.0)
    X_d = np.zeros((cfg.N + 1, 2))
    res = mpc_step(np.zeros(2), X_d, lin, cfg)
    assert abs(res.first[0]) < 1e-8
    assert res.first[1] == pytest.approx(cfg.lambda_min, abs=1e-8)


def test_plans_satisfy_cone(rng):
    cfg = MpcConfig()
    for _ in range(50):
        lin = _lin(lz=rng.uniform(5, 80), x0=rng.uniform(-0.2, 0.2))
        x0 = rng.normal(size=2) * [0.05, 0.5]
        res = mpc_step(x0, _ramp(cfg.N, offset=rng.uniform(-0.1, 0.1)), lin, cfg)
        assert res.solution.optimal
        lx, lz = res.plan[:, 0], res.plan[:, 1]
        assert np.all(np.abs(lx) <= cfg.mu * lz + 1e-8)
        assert np.all(lz >= cfg.lambda_min - 1e-8)


def test_box_plans_respect_frozen_bound(rng):
    cfg = MpcConfig(constraint_form="box")
    for _ in range(50):
        lz_op = rng.uniform(5, 80)
        lin = _lin(lz=lz_op, x0=rng.uniform(-0.2, 0.2))
        x0 = rng.normal(size=2) * [0.05, 0.5]
        res = mpc_step(x0, _ramp(cfg.N, offset=rng.uniform(-0.1, 0.1)), lin, cfg)
        assert res.solution.optimal
        assert np.all(np.abs(res.plan[:, 0]) <= cfg.mu * lz_op + 1e-8)
        assert np.all(res.plan[:, 1] >= cfg.lambda_min - 1e-8)


def test_tail_of_plan_is_optimal_from_predicted_state():
    """Principle of optimality: the plan's tail solves the shorter problem from the predicted state."""
    lin = _lin()
    x0 = np.array([0.02, 0.1])
    N = 10
    first = mpc_step(x0, _ramp(N), lin, MpcConfig(N=N))
    x1 = lin.A_d @ x0 + lin.B_d @ first.plan[0]
    tail = mpc_step(x1, _ramp(N - 1, start=1), lin, MpcConfig(N=N - 1))
    assert np.max(np.abs(tail.plan - first.plan[1:])) < 1e-6


def test_warm_start_does_not_change_the_plan():
    lin = _lin()
    cfg = MpcConfig()
    x0 = np.array([0.02, 0.1])
    cold = mpc_step(x0, _ramp(cfg.N), lin, cfg)
    warm = mpc_step(x0, _ramp(cfg.N), lin, cfg, previous_plan=cold.plan)
    assert np.max(np.abs(cold.plan - warm.plan)) < 1e-6


def test_shift_plan_repeats_last_input():
    plan = np.arange(6.0).reshape(3, 2)
    assert np.array_equal(shift_plan(plan), [[2, 3], [4, 5], [4, 5]])


def test_config_validation():
    with pytest.raises(ValueError):
        MpcConfig(N=0)
    with pytest.raises(ValueError):
        MpcConfig(Q=np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        MpcConfig(constraint_form="ellipse")
    cfg = MpcConfig()
    assert cfg.lambda_min == 5.0 and cfg.N == 10 and cfg.dt == 0.01
    assert np.array_equal(cfg.Q, np.diag([300000.0, 2000.0]))
