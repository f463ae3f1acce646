"""Scalar run metrics computed from a :class:`~thrustwalk.sim.TrajectoryLog`."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .qp import QpStatus
from .sim import SimConfig, TrajectoryLog, slope_state

PLAN_CONE_TOL = 1e-8
STRIDE_TOL = 1e-2
STRIDE_WINDOW = 10
VELOCITY_BAND = 0.1
TRANSIENT = 1.5


class EnvelopeViolations(NamedTuple):
    count: int
    samples: int  # plant samples with a foot in contact
    max_excess: float  # N


def tracking_rms(log: TrajectoryLog) -> tuple[float, float]:
    """RMS of the ROM position and velocity errors over controller ticks."""
    if len(log.t_ctrl) == 0:
        return 0.0, 0.0
    err = log.rom_x - log.rom_ref
    return float(np.sqrt(np.mean(err[:, 0] ** 2))), float(np.sqrt(np.mean(err[:, 1] ** 2)))


def plan_cone_violations(log: TrajectoryLog, mu_s: float, tol: float = PLAN_CONE_TOL) -> int:
    """Planned forces over the whole horizon with ``|lx| > mu_s lz + tol``."""
    plan = log.lambda_plan.reshape(-1, 2)
    return int(np.count_nonzero(np.abs(plan[:, 0]) > mu_s * plan[:, 1] + tol))


def grf_envelope(log: TrajectoryLog, mu_s: float) -> EnvelopeViolations:
    """Plant contact forces outside ``|f_x| <= mu_s f_z`` (sagittal slope axis)."""
    count = samples = 0
    excess = 0.0
    for i in range(2):
        f = log.grf[:, 3 * i:3 * i + 3]
        on = log.contact[:, i]
        over = np.abs(f[on, 0]) - mu_s * f[on, 2]
        samples += int(np.count_nonzero(on))
        bad = over > 0.0
        count += int(np.count_nonzero(bad))
        if np.any(bad):
            excess = max(excess, float(np.max(over[bad])))
    return EnvelopeViolations(count, samples, excess)


def sagittal_velocity(log: TrajectoryLog, config: SimConfig) -> np.ndarray:
    """Slope-frame body velocity along the incline at every plant sample."""
    Rs = config.params.ground.slope_rotation()
    return log.states[:, 21:24] @ Rs[:, 0]


def velocity_band_error(log: TrajectoryLog, config: SimConfig, transient: float = TRANSIENT) -> float:
    """Largest ``|v - v_ref|`` over plant samples after ``transient`` (0 if none)."""
    mask = log.t >= transient
    if not np.any(mask):
        return 0.0
    return float(np.max(np.abs(sagittal_velocity(log, config)[mask] - config.reference_speed)))


def stride_differences(log: TrajectoryLog) -> np.ndarray:
    """``|s[i+2] - s[i]|`` between stride-start states of the same stance leg."""
    states = [s for _, _, s in log.stride_starts]
    return np.array([np.linalg.norm(states[i + 2] - states[i]) for i in range(len(states) - 2)])


def stride_convergence_index(diffs: np.ndarray, tol: float = STRIDE_TOL) -> int | None:
    """First index from which every stride difference stays below ``tol``."""
    above = np.flatnonzero(~(np.asarray(diffs) < tol))
    if len(diffs) == 0:
        return None
    if len(above) == 0:
        return 0
    idx = int(above[-1]) + 1
    return idx if idx < len(diffs) else None


def median_solve_time(log: TrajectoryLog) -> float:
    return float(np.median(log.qp_solve_time)) if len(log.qp_solve_time) else 0.0


def summary(log: TrajectoryLog, config: SimConfig) -> dict[str, object]:
    """Metrics written to ``summary.txt``; only the solve time depends on wall clock."""
    mu_s = config.params.ground.mu_s
    pos_rms, vel_rms = tracking_rms(log)
    env = grf_envelope(log, mu_s)
    diffs = stride_differences(log)
    conv = stride_convergence_index(diffs)
    p, _ = slope_state(log.states[-1], config.params)
    return {
        "duration": float(log.t[-1]),
        "plant_samples": len(log.t),
        "control_ticks": len(log.t_ctrl),
        "reference_speed": config.reference_speed,
        "tracking_rms_position": pos_rms,
        "tracking_rms_velocity": vel_rms,
        "velocity_band_error_after_transient": velocity_band_error(log, config),
        "cone_violations_plan": plan_cone_violations(log, mu_s),
        "cone_violations_grf": env.count,
        "grf_contact_samples": env.samples,
        "grf_max_envelope_excess": env.max_excess,
        "strides": len(log.stride_starts),
        "stride_difference_last": float(diffs[-1]) if len(diffs) else float("nan"),
        "stride_difference_max_tail": float(np.max(diffs[STRIDE_WINDOW:])) if len(diffs) > STRIDE_WINDOW else float("nan"),
        "stride_convergence_index": -1 if conv is None else conv,
        "wbc_residual_max": float(np.max(log.wbc_residuals)) if len(log.wbc_residuals) else 0.0,
        "qp_non_optimal": sum(1 for s in log.qp_status if s != QpStatus.OPTIMAL.value),
        "distance_along_slope": float(p[0]),
        "forced_switches": sum(1 for _, kind in log.events if kind.startswith("forced")),
        "median_qp_solve_time_ms": 1e3 * median_solve_time(log),
    }
