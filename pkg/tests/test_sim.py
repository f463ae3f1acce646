import math

import numpy as np
import pytest
from scipy.linalg import polar

from thrustwalk import wbc
from thrustwalk.checks import random_state
from thrustwalk.config import load_config
from thrustwalk.dynamics import GeneralizedInputs, forward_dynamics, state_derivative
from thrustwalk.mpc import MpcConfig
from thrustwalk.sim import (
    IntegrationError,
    Plant,
    SimConfig,
    reorthonormalize,
    rk4_step,
    simulate,
    standing_state,
)
from thrustwalk.spatial import skew


def test_rk4_zero_flow():
    x = np.array([1.0, -2.0, 3.0])
    assert np.array_equal(rk4_step(lambda x, u: np.zeros_like(x), x, None, 0.1), x)


def test_rk4_exponential():
    x1 = rk4_step(lambda x, u: x, np.array([1.0]), None, 0.1)
    assert abs(x1[0] - math.exp(0.1)) < 1e-7


def test_rk4_reports_non_finite_derivative():
    with pytest.raises(IntegrationError):
        rk4_step(lambda x, u: np.full_like(x, np.nan), np.array([1.0]), None, 0.1)
    with pytest.raises(ValueError):
        rk4_step(lambda x, u: x, np.array([1.0]), None, 0.0)


def _flight(params, dt, T=0.2):
    """Free flight of the tumbling robot, well clear of the ground."""
    rng = np.random.default_rng(5)
    x = standing_state(params).to_vector()
    x[11] += 5.0
    x[18:30] = rng.uniform(-2, 2, 12)
    zero = GeneralizedInputs(np.zeros(6), np.zeros(12), np.zeros(6))

    def f(xs, _):
        return state_derivative(xs, forward_dynamics(xs, zero, params))

    for _ in range(int(round(T / dt))):
        x = rk4_step(f, x, None, dt)
    return x


def test_rk4_is_fourth_order(params):
    dt = 0.01
    ref = _flight(params, dt / 8)
    e1 = np.max(np.abs(_flight(params, dt) - ref))
    e2 = np.max(np.abs(_flight(params, dt / 2) - ref))
    assert 16.0 * 0.8 < e1 / e2 < 16.0 * 1.25


def test_reorthonormalize_fixed_point(params):
    R = standing_state(params).R
    assert np.max(np.abs(reorthonormalize(R) - R)) < 1e-12


def _check_rotation(R):
    assert np.max(np.abs(R.T @ R - np.eye(3))) < 1e-12
    assert abs(np.linalg.det(R) - 1.0) < 1e-12


def test_reorthonormalize_small_perturbation():
    M = np.eye(3) + 1e-3 * skew([0.3, -0.5, 0.8])
    R = reorthonormalize(M)
    _check_rotation(R)
    assert np.max(np.abs(R - M)) < 2e-3
    assert np.allclose(R, polar(M)[0], atol=1e-12)


def test_reorthonormalize_scaled_column(rng):
    M = random_state(rng)[0:9].reshape(3, 3).copy()
    M[:, 1] *= 1.01
    R = reorthonormalize(M)
    _check_rotation(R)
    assert np.allclose(R, polar(M)[0], atol=1e-12)


def test_reorthonormalize_rejects_reflection():
    with pytest.raises(IntegrationError):
        reorthonormalize(np.diag([1.0, 1.0, -1.0]))


def test_static_drop_normal_force(params):
    """Rigid robot dropped onto the slope: each foot carries half the slope-normal weight."""
    plant = Plant(params, lock_joints=True)
    Rs = params.ground.slope_rotation()
    x = standing_state(params).to_vector()
    x[9:12] += Rs @ [0.0, 0.0, 0.005]
    cmd = wbc.ControlCommand.zero()
    for _ in range(3000):
        x = rk4_step(plant.derivative, x, cmd, 5e-4)
    _, forces = plant.accel(x, cmd)
    m, g, a = params.mass.total_mass, params.mass.g, params.ground.slope_alpha
    for f in forces:
        assert f.contact
        assert f.force[2] == pytest.approx(m * g * math.cos(a) / 2, rel=1e-3)


def test_nominal_run_keeps_rotation_orthonormal(nominal_log):
    Rs = nominal_log.states[:, 0:9].reshape(-1, 3, 3)
    err = np.max(np.abs(np.einsum("kji,kjl->kil", Rs, Rs) - np.eye(3)))
    assert err < 1e-6


def test_nominal_run_is_finite(nominal_log):
    for name in ("states", "grf", "u_j", "thrust", "lambda_plan", "lambda_c", "wbc_residuals", "rom_x"):
        assert np.all(np.isfinite(getattr(nominal_log, name))), name


def test_control_rate_ratio(nominal_log, nominal_config):
    dt = nominal_config.dt_plant
    steps = np.rint(np.diff(nominal_log.t_ctrl) / dt).astype(int)
    assert np.allclose(np.diff(nominal_log.t_ctrl) / dt, steps, atol=1e-6)
    switch_times = np.array([t for t, _ in nominal_log.events])
    for i in np.flatnonzero(steps != nominal_config.substeps):
        # short intervals only where the controller re-ticked at a leg switch
        assert steps[i] < nominal_config.substeps
        assert np.min(np.abs(switch_times - nominal_log.t_ctrl[i + 1])) < 1e-9
    assert np.mean(steps == nominal_config.substeps) > 0.9


def test_timestamps_monotone(nominal_log, nominal_config):
    assert np.all(np.diff(nominal_log.t) > 0)
    assert np.all(np.diff(nominal_log.t_ctrl) > 0)
    assert nominal_log.t[-1] == pytest.approx(nominal_config.duration)


def test_short_run_is_deterministic():
    a = simulate(SimConfig(duration=0.3))
    b = simulate(SimConfig(duration=0.3))
    assert np.array_equal(a.states, b.states)
    assert np.array_equal(a.u_j, b.u_j)
    assert a.qp_iterations.tolist() == b.qp_iterations.tolist()


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(duration=0.0)
    with pytest.raises(ValueError):
        SimConfig(dt_ctrl=1.3e-3)
    with pytest.raises(ValueError):
        SimConfig(dt_ctrl=2e-2)
    cfg = SimConfig(dt_ctrl=2e-2, mpc=MpcConfig(dt=2e-2))
    assert cfg.substeps == 40
    assert SimConfig().reference_speed == pytest.approx(0.375)


def test_config_file_drives_the_run(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("duration = 0.05\ngait.step_duration = 0.5  # slower gait\nmpc.horizon = 5\n")
    cfg = load_config(path)
    assert cfg.duration == 0.05 and cfg.gait.step_duration == 0.5 and cfg.mpc.N == 5
    log = simulate(cfg)
    assert log.lambda_plan.shape[1] == 5
    assert log.t[-1] == pytest.approx(0.05)
