"""Fixed-step plant integration with a lower-rate controller in the loop.

The plant runs classical RK4 at ``dt_plant``; every ``dt_ctrl`` the controller
measures the state, re-linearizes the ROM, solves the MPC, maps the plan to
thrust and stance inputs, and the resulting command is held (zero-order hold)
until the next tick.  A stance switch detected between ticks ends the hold
early: the controller ticks at the switch and its grid restarts there.  The
plant carries a planarizing constraint that locks the lateral translation and
the body attitude, so only the sagittal body motion and the joints evolve.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import contact, dynamics, gait, mpc, rom, wbc
from .dynamics import B_J, SingularConfigurationError, evaluate, thruster_generalized_force
from .model import STATE_DIM, RobotParams, RobotState
from .qp import QpStatus
from .spatial import leg_chain

log = logging.getLogger(__name__)

STATE_NAMES = (
    [f"r_B{i}{j}" for i in range(1, 4) for j in range(1, 4)]
    + ["p_Bx", "p_By", "p_Bz", "gamma_hL", "gamma_hR", "phi_hL", "phi_hR", "phi_kL", "phi_kR"]
    + ["omega_x", "omega_y", "omega_z"]
    + ["p_Bx_dot", "p_By_dot", "p_Bz_dot", "gamma_hL_dot", "gamma_hR_dot", "phi_hL_dot", "phi_hR_dot"]
    + ["phi_kL_dot", "phi_kR_dot"]
)


class IntegrationError(RuntimeError):
    pass


class SimulationError(RuntimeError):
    def __init__(self, t: float, message: str):
        super().__init__(f"t = {t:.4f} s: {message}")
        self.t = t


def rk4_step(f: Callable, x: np.ndarray, u, dt: float) -> np.ndarray:
    """One classical RK4 step of ``x_dot = f(x, u)`` with ``u`` held constant."""
    if dt <= 0:
        raise ValueError("dt must be positive")

    def checked(xs):
        d = np.asarray(f(xs, u), dtype=float)
        bad = np.flatnonzero(~np.isfinite(d))
        if bad.size:
            i = int(bad[0])
            name = STATE_NAMES[i] if d.size == STATE_DIM else f"x[{i}]"
            raise IntegrationError(f"non-finite derivative in component {name} ({d[i]})")
        return d

    k1 = checked(x)
    k2 = checked(x + 0.5 * dt * k1)
    k3 = checked(x + 0.5 * dt * k2)
    k4 = checked(x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def reorthonormalize(R: np.ndarray, tol: float = 1e-15, max_iter: int = 20) -> np.ndarray:
    """Orthonormal polar factor by Newton iteration ``X <- (X + X^-T) / 2``."""
    X = np.asarray(R, dtype=float).copy()
    if np.linalg.det(X) <= 0.0:
        raise IntegrationError("rotation matrix degenerated (det <= 0)")
    for _ in range(max_iter):
        X_new = 0.5 * (X + np.linalg.inv(X).T)
        if np.max(np.abs(X_new - X)) < tol:
            X = X_new
            break
        X = X_new
    if np.linalg.det(X) <= 0.0:
        raise IntegrationError("rotation matrix degenerated (det <= 0)")
    return X


# ---------------------------------------------------------------------------
# plant


class Plant:
    """Full-model dynamics with compliant ground and the planarizing constraint."""

    def __init__(self, params: RobotParams, locked=("y", "roll", "pitch", "yaw"), lock_joints: bool = False):
        self.params = params
        locked_idx = {wbc.PLANAR_COORDS[c] for c in locked}
        if lock_joints:
            # rigid robot: hip frontal and sagittal joints held, knees unactuated
            locked_idx |= {6, 7, 8, 9}
        self.lock_joints = lock_joints
        self.free = np.array([i for i in range(10) if i not in locked_idx])

    def accel(self, x: np.ndarray, cmd: wbc.ControlCommand):
        ev = evaluate(x, self.params)
        u_g, forces = contact.wrench_from_evaluation(ev, self.params.ground)
        rhs = -ev.h + B_J @ cmd.u_j + thruster_generalized_force(ev, cmd.thrust) + dynamics.ground_map(ev) @ u_g
        a = np.zeros(12)
        f = self.free
        Mff = ev.M[np.ix_(f, f)]
        try:
            a[f] = dynamics.solve_accel(Mff, rhs[f], check=False)
        except np.linalg.LinAlgError as exc:
            raise SingularConfigurationError(str(exc)) from None
        a[10:12] = 0.0 if self.lock_joints else cmd.u_j[4:6]
        return a, forces

    def derivative(self, x: np.ndarray, cmd: wbc.ControlCommand) -> np.ndarray:
        a, _ = self.accel(x, cmd)
        return dynamics.state_derivative(x, a)


# ---------------------------------------------------------------------------
# configuration and initial condition


@dataclass(eq=False)
class SimConfig:
    duration: float = 10.0
    dt_plant: float = 5e-4
    dt_ctrl: float = 1e-2
    params: RobotParams = field(default_factory=RobotParams)
    mpc: mpc.MpcConfig = field(default_factory=mpc.MpcConfig)
    gait: gait.GaitSchedule = field(default_factory=gait.GaitSchedule)
    pid: gait.PidGains = field(
        default_factory=lambda: gait.PidGains(K_p=[80.0, 80.0, 400.0], K_i=[5.0, 5.0, 0.0], K_d=[2.0, 2.0, 40.0])
    )
    v_ref: float | None = None  # default step_length / step_duration
    first_step_time: float = 0.1
    touchdown_force: float = 1.0
    switch_window: float = 0.1
    swing_target_depth: float = 0.002
    stance_leg_length: float = 0.5  # hip-to-foot distance of the initial stance
    swing_feedforward: bool = True
    height_kp: float = 100.0
    height_kd: float = 20.0
    stance_kp: float = 2000.0  # stance-foot normal PD, acts through the knee channel
    stance_kd: float = 90.0
    planar_lock: tuple = ("y", "roll", "pitch", "yaw")
    seed: int = 0
    init_noise: float = 0.0
    max_qp_failures: int = 3
    initial_state: RobotState | None = None

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if self.dt_plant <= 0:
            raise ValueError("dt_plant must be positive")
        ratio = self.dt_ctrl / self.dt_plant
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ValueError("dt_ctrl must be an integer multiple of dt_plant")
        if abs(self.mpc.dt - self.dt_ctrl) > 1e-12:
            raise ValueError("MPC period must equal the controller period")

    @property
    def substeps(self) -> int:
        return int(round(self.dt_ctrl / self.dt_plant))

    @property
    def reference_speed(self) -> float:
        if self.v_ref is not None:
            return self.v_ref
        return self.gait.step_length / self.gait.step_duration


def standing_state(params: RobotParams, leg_length: float = 0.5) -> RobotState:
    """Body aligned with the slope, both feet on the surface directly below the hips."""
    Rs = params.ground.slope_rotation()
    angles = []
    height = None
    for side in ("L", "R"):
        geom = params.leg(side)
        hip_y = geom.l1[1] + geom.l2[1]
        target = np.array([0.0, hip_y, geom.l1[2] + geom.l2[2] - leg_length])
        angles.append(gait.inverse_kinematics(target, geom))
        height = -target[2]
    q = np.zeros(7)
    q[0:3] = Rs @ np.array([0.0, 0.0, height])
    q[3], q[4] = angles[0].gamma_h, angles[1].gamma_h
    q[5], q[6] = angles[0].phi_h, angles[1].phi_h
    phi_k = np.array([angles[0].phi_k, angles[1].phi_k])
    return RobotState(R=Rs.copy(), q=q, phi_k=phi_k)


# ---------------------------------------------------------------------------
# logging


@dataclass(eq=False)
class TrajectoryLog:
    t: np.ndarray  # plant samples
    states: np.ndarray  # (n, 30)
    grf: np.ndarray  # (n, 6) slope-frame force on each foot
    contact: np.ndarray  # (n, 2) bool
    t_ctrl: np.ndarray
    u_j: np.ndarray  # (k, 6)
    thrust: np.ndarray  # (k, 6) inertial, left then right
    thrust_slope: np.ndarray  # (k, 2)
    lambda_first: np.ndarray  # (k, 2)
    lambda_plan: np.ndarray  # (k, N, 2)
    lambda_c: np.ndarray  # (k, n_locked)
    qp_status: list
    qp_iterations: np.ndarray
    qp_objective: np.ndarray
    qp_kkt: np.ndarray
    qp_solve_time: np.ndarray  # wall clock, not part of the deterministic CSVs
    wbc_residuals: np.ndarray  # (k, 3) dynamics, contact, planar
    phase: np.ndarray
    stance: list
    rom_x: np.ndarray  # (k, 2) slope-frame body position and velocity
    rom_ref: np.ndarray  # (k, 2)
    swing_ref: np.ndarray  # (k, 3) slope-frame swing-foot reference
    mpc_input: np.ndarray  # (k, 4) relative x0 (2), reference offset, lambda_z operating point
    stride_starts: list  # (time, stance leg, stride state)
    events: list = field(default_factory=list)


def slope_state(x: np.ndarray, params: RobotParams):
    """Slope-frame body position and velocity."""
    Rs = params.ground.slope_rotation()
    return Rs.T @ x[9:12], Rs.T @ x[21:24]


def stride_state(x: np.ndarray, params: RobotParams, foot_slope: np.ndarray) -> np.ndarray:
    """State with the body position taken relative to the stance foot (slope frame)."""
    p, v = slope_state(x, params)
    rel = p - foot_slope
    return np.concatenate([[rel[0], rel[2], v[0], v[2]], x[12:18], x[24:30]])


# ---------------------------------------------------------------------------
# controller


class Controller:
    def __init__(self, config: SimConfig, x0: np.ndarray):
        self.cfg = config
        self.params = config.params
        self.Rs = self.params.ground.slope_rotation()
        sched = config.gait
        self.schedule = gait.GaitSchedule(
            step_duration=sched.step_duration,
            step_length=sched.step_length,
            step_height=sched.step_height,
            stance_leg=sched.stance_leg,
            step_start=config.first_step_time,
        )
        ev = evaluate(x0, self.params, with_dynamics=False)
        feet = np.array([self.Rs.T @ ev.foot_pos[i] for i in range(2)])
        p0, _ = slope_state(x0, self.params)
        st = 0 if self.schedule.stance_leg == "L" else 1
        z0 = p0[2] - feet[st][2]
        mp = self.params.mass
        self.rom = rom.RomParams(m=mp.total_mass, z0=z0, alpha=self.params.ground.slope_alpha, g=mp.g)
        self.x_start = p0[0]
        self.lambda_z_prev = self.rom.m * self.rom.g * math.cos(self.rom.alpha)
        self.prev_plan = None
        self.failures = 0
        self.integral = np.zeros(3)
        self.swing_start = feet[1 - st].copy()
        self.swing_traj = None
        self.prev_cmd = wbc.ControlCommand.zero()
        self.J_c = wbc.planar_jacobian(config.planar_lock)
        self.prev_qd_t = None

    # reference -------------------------------------------------------------
    def x_ref(self, t: float) -> float:
        return self.x_start + self.cfg.reference_speed * t

    def swing_target(self, body_y: float) -> np.ndarray:
        """Touchdown point: half a step ahead of the reference, laterally under the hip."""
        s = self.schedule
        t_td = s.step_start + s.step_duration
        x = self.x_ref(t_td) + 0.5 * s.step_length
        geom = self.params.leg(s.swing_leg)
        y = body_y + geom.l1[1] + geom.l2[1]
        return np.array([x, y, -self.cfg.swing_target_depth])

    def on_switch(self, t: float, feet_slope: np.ndarray) -> None:
        self.schedule.switch(t)
        sw = 0 if self.schedule.swing_leg == "L" else 1
        self.swing_start = feet_slope[sw].copy()
        self.swing_traj = None
        self.integral[:] = 0.0
        self.prev_plan = None
        self.prev_qd_t = None

    # one tick ----------------------------------------------------------------
    def tick(self, t: float, x: np.ndarray):
        cfg, params = self.cfg, self.params
        ev = evaluate(x, params)
        sched = self.schedule
        stance = sched.stance_leg
        st = 0 if stance == "L" else 1
        sw = 1 - st
        feet = np.array([self.Rs.T @ ev.foot_pos[i] for i in range(2)])
        p, v = slope_state(x, params)
        c = feet[st]

        # ROM and MPC
        x0 = np.array([p[0] - c[0], v[0]])
        N = cfg.mpc.N
        times = t + cfg.mpc.dt * np.arange(N + 1)
        X_d = np.column_stack([self.x_ref(times) - c[0], np.full(N + 1, cfg.reference_speed)])
        lin = rom.linearization((self.lambda_z_prev, x0[0], 0.0), self.rom, cfg.mpc.dt)
        res = mpc.mpc_step(x0, X_d, lin, cfg.mpc, previous_plan=self.prev_plan)
        sol = res.solution
        if sol.status is QpStatus.OPTIMAL:
            plan = res.plan
            self.failures = 0
        else:
            self.failures += 1
            log.warning("t=%.3f QP %s (%d consecutive)", t, sol.status.value, self.failures)
            if self.failures >= cfg.max_qp_failures or self.prev_plan is None:
                raise SimulationError(t, f"QP {sol.status.value} for {self.failures} consecutive ticks")
            plan = mpc.shift_plan(self.prev_plan)
        lam = plan[0].copy()
        self.prev_plan = plan
        self.lambda_z_prev = lam[1]

        # thrust from the ROM
        xdd = float((lin.A @ x0 + lin.B @ lam)[1])
        zdd = cfg.height_kp * (self.rom.z0 - (p[2] - c[2])) - cfg.height_kd * v[2]
        utx, utz = wbc.thruster_from_rom((xdd, zdd), lam, self.rom)
        thrust_world = self.Rs @ np.array([utx, 0.0, utz])
        thrust = np.vstack([0.5 * thrust_world, 0.5 * thrust_world])

        # swing leg
        u_sw = self.swing_control(t, x, ev, feet, sw)

        # stance mapping
        S_st, S_sw = wbc.selection_matrices(stance)
        force_world = self.Rs @ np.array([-lam[0], 0.0, lam[1]])
        problem = wbc.WbcProblem(
            M=ev.M,
            h=ev.h,
            B_g=dynamics.ground_map(ev),
            J_s=ev.J_foot[st],
            Jdot_s_v=ev.foot_bias[st],
            J_c=self.J_c,
            S_st=S_st,
            S_sw=S_sw,
            u_sw=u_sw,
            u_t=thruster_generalized_force(ev, thrust),
            u_g=wbc.embed_ground_force(force_world, stance),
        )
        try:
            ws = wbc.stance_torque(problem)
            u_st, lam_c, resid = ws.u_st, ws.lambda_c, ws.residuals
        except wbc.SingularStanceError as exc:
            log.warning("t=%.3f %s; holding previous stance inputs", t, exc)
            u_st, lam_c, resid = self.prev_cmd.u_st, self.prev_cmd.lambda_c, (np.nan,) * 3
        u_st_cmd = np.array(u_st, dtype=float)
        u_st_cmd[2] += self.stance_correction(ev, st, lam[1])
        u_j = S_st @ u_st_cmd + S_sw @ u_sw
        cmd = wbc.ControlCommand(
            u_j=u_j,
            thrust=thrust,
            u_st=u_st,
            u_sw=u_sw,
            lambda_c=lam_c,
            lambda_plan=lam,
            thrust_slope=np.array([utx, utz]),
        )
        self.prev_cmd = cmd
        info = {
            "plan": plan,
            "status": sol.status.value,
            "iterations": sol.iterations,
            "objective": sol.objective,
            "kkt": sol.kkt_residual,
            "solve_time": sol.solve_time,
            "residuals": resid,
            "rom": np.array([p[0], v[0]]),
            "ref": np.array([self.x_ref(t), cfg.reference_speed]),
            "swing_ref": self.swing_ref,
            # enough to rebuild this tick's condensed problem at any horizon
            "mpc_input": np.array([x0[0], x0[1], self.x_ref(t) - c[0], lin.op_point[0]]),
        }
        return cmd, info

    def stance_correction(self, ev, st: int, lambda_z: float) -> float:
        """Knee acceleration steering the stance-foot penetration toward the planned load."""
        cfg = self.cfg
        J = self.Rs.T @ ev.J_foot[st]
        gain = J[2, 10 + st]
        if abs(gain) < 1e-3:
            return 0.0
        z = (self.Rs.T @ ev.foot_pos[st])[2]
        zd = (self.Rs.T @ ev.foot_vel[st])[2]
        z_des = -lambda_z / self.params.ground.k_gp
        return (-cfg.stance_kp * (z - z_des) - cfg.stance_kd * zd) / gain

    def swing_control(self, t, x, ev, feet, sw) -> np.ndarray:
        cfg, params = self.cfg, self.params
        sched = self.schedule
        side = "L" if sw == 0 else "R"
        geom = params.leg(side)
        idx = np.array([12, 14, 16]) + sw
        q = x[idx]
        qd = x[idx + 12]
        if t < cfg.first_step_time:
            target, target_vel = self.swing_start, np.zeros(3)
        else:
            if self.swing_traj is None:
                body_y = (self.Rs.T @ x[9:12])[1]
                self.swing_traj = gait.swing_coefficients(self.swing_start, self.swing_target(body_y), sched.step_height)
            sched.update(t)
            target, target_vel = gait.swing_reference(sched, None, None, self.swing_traj)
        self.swing_ref = np.asarray(target, dtype=float).copy()
        R = ev.R
        p_B = x[9:12]
        s_target = R.T @ (self.Rs @ target - p_B)
        try:
            q_t = np.array(gait.inverse_kinematics(s_target, geom))
        except gait.WorkspaceError as exc:
            q_t = np.array(exc.clamped)
        sdot_target = R.T @ (self.Rs @ target_vel - x[21:24])
        ch = leg_chain(q_t, np.zeros(3), geom)
        try:
            qd_t = np.linalg.solve(ch.S_F, sdot_target)
        except np.linalg.LinAlgError:
            qd_t = np.zeros(3)
        e = q_t - q
        self.integral = gait.clamp_integral(self.integral + e * cfg.dt_ctrl, cfg.pid)
        u = gait.pid_torque(e, qd_t - qd, self.integral, cfg.pid)
        if cfg.swing_feedforward:
            # bias (gravity, velocity) compensation on the hip torques and the
            # reference acceleration on the knee, which is an acceleration channel
            u[:2] += ev.h[idx[:2] - 6]
            if self.prev_qd_t is not None:
                u[2] += (qd_t[2] - self.prev_qd_t[2]) / cfg.dt_ctrl
            self.prev_qd_t = qd_t
        return u


def foot_height(x: np.ndarray, params: RobotParams, side: int) -> float:
    """Slope-normal height of one foot above the surface."""
    ev = evaluate(x, params, with_dynamics=False)
    return float((params.ground.slope_rotation().T @ ev.foot_pos[side])[2])


def locate_touchdown(f: Callable, x: np.ndarray, u, dt: float, height: Callable, iters: int = 60):
    """Sub-step ``tau`` in ``(0, dt]`` at which ``height`` of the RK4 flow crosses zero.

    ``x`` must be on the positive side.  Returns ``(tau, state at tau)``.
    """
    lo, hi = 0.0, dt
    x_hi = rk4_step(f, x, u, hi)
    if height(x_hi) > 0.0:
        return hi, x_hi
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        x_mid = rk4_step(f, x, u, mid)
        if height(x_mid) > 0.0:
            lo = mid
        else:
            hi, x_hi = mid, x_mid
        if hi - lo <= 1e-15 * dt:
            break
    return hi, x_hi


# ---------------------------------------------------------------------------
# main loop


def initial_vector(config: SimConfig) -> np.ndarray:
    state = config.initial_state or standing_state(config.params, config.stance_leg_length)
    x = state.to_vector()
    if config.init_noise > 0.0:
        rng = np.random.default_rng(config.seed)
        # perturb only the unconstrained sagittal velocities
        for i in (21, 23, 24, 25, 26, 27):
            x[i] += config.init_noise * rng.standard_normal()
    return x


def _assemble(config, k, t_log, states, grf, contact_flags, ctrl_rows, stride_starts, events) -> TrajectoryLog:
    nc = len(ctrl_rows)
    N = config.mpc.N
    n_locked = len(config.planar_lock)
    return TrajectoryLog(
        t=t_log[: k + 1].copy(),
        states=states[: k + 1].copy(),
        grf=grf[: k + 1].copy(),
        contact=contact_flags[: k + 1].copy(),
        t_ctrl=np.array([r["t"] for r in ctrl_rows]),
        u_j=np.array([r["cmd"].u_j for r in ctrl_rows]).reshape(nc, 6),
        thrust=np.array([r["cmd"].thrust.reshape(6) for r in ctrl_rows]).reshape(nc, 6),
        thrust_slope=np.array([r["cmd"].thrust_slope for r in ctrl_rows]).reshape(nc, 2),
        lambda_first=np.array([r["cmd"].lambda_plan for r in ctrl_rows]).reshape(nc, 2),
        lambda_plan=np.array([r["plan"] for r in ctrl_rows]).reshape(nc, N, 2),
        lambda_c=np.array([r["cmd"].lambda_c for r in ctrl_rows]).reshape(nc, n_locked),
        qp_status=[r["status"] for r in ctrl_rows],
        qp_iterations=np.array([r["iterations"] for r in ctrl_rows], dtype=int),
        qp_objective=np.array([r["objective"] for r in ctrl_rows]),
        qp_kkt=np.array([r["kkt"] for r in ctrl_rows]),
        qp_solve_time=np.array([r["solve_time"] for r in ctrl_rows]),
        wbc_residuals=np.array([r["residuals"] for r in ctrl_rows]).reshape(nc, 3),
        phase=np.array([r["phase"] for r in ctrl_rows]),
        stance=[r["stance"] for r in ctrl_rows],
        rom_x=np.array([r["rom"] for r in ctrl_rows]).reshape(nc, 2),
        rom_ref=np.array([r["ref"] for r in ctrl_rows]).reshape(nc, 2),
        swing_ref=np.array([r["swing_ref"] for r in ctrl_rows]).reshape(nc, 3),
        mpc_input=np.array([r["mpc_input"] for r in ctrl_rows]).reshape(nc, 4),
        stride_starts=stride_starts,
        events=events,
    )


def simulate(config: SimConfig) -> TrajectoryLog:
    """Run the closed loop; a :class:`SimulationError` carries the partial log as ``.log``."""
    params = config.params
    Rs = params.ground.slope_rotation()
    plant = Plant(params, config.planar_lock)
    x = initial_vector(config)
    ctrl = Controller(config, x)
    sub = config.substeps
    n_plant = max(1, int(round(config.duration / config.dt_plant)))

    t_log = np.empty(n_plant + 1)
    states = np.empty((n_plant + 1, STATE_DIM))
    grf = np.zeros((n_plant + 1, 6))
    contact_flags = np.zeros((n_plant + 1, 2), dtype=bool)
    ctrl_rows = []
    stride_starts = []
    events = []

    def record_forces(k, ev):
        _, forces = contact.wrench_from_evaluation(ev, params.ground)
        for i, gf in enumerate(forces):
            grf[k, 3 * i:3 * i + 3] = gf.force
            contact_flags[k, i] = gf.contact
        return forces

    k = 0
    t_log[0] = 0.0
    states[0] = x
    record_forces(0, evaluate(x, params, with_dynamics=False))
    pending = False
    touchdown_from = None
    try:
        while k < n_plant:
            t = k * config.dt_plant
            if pending:
                ev = evaluate(x, params, with_dynamics=False)
                feet = np.array([Rs.T @ ev.foot_pos[i] for i in range(2)])
                ctrl.on_switch(t, feet)
                st_new = 0 if ctrl.schedule.stance_leg == "L" else 1
                if touchdown_from is not None:
                    # stride starts are sampled on the touchdown surface itself
                    x_prev, cmd_prev = touchdown_from
                    tau, x_td = locate_touchdown(
                        plant.derivative, x_prev, cmd_prev, config.dt_plant, lambda z: foot_height(z, params, st_new)
                    )
                    ev_td = evaluate(x_td, params, with_dynamics=False)
                    foot_td = Rs.T @ ev_td.foot_pos[st_new]
                    t_td = t - config.dt_plant + tau
                    stride_starts.append((t_td, ctrl.schedule.stance_leg, stride_state(x_td, params, foot_td)))
                else:
                    stride_starts.append((t, ctrl.schedule.stance_leg, stride_state(x, params, feet[st_new])))
                pending = False
                touchdown_from = None
            try:
                cmd, info = ctrl.tick(t, x)
            except (wbc.SingularStanceError, SingularConfigurationError, np.linalg.LinAlgError) as exc:
                raise SimulationError(t, str(exc)) from exc
            info.update(t=t, cmd=cmd, phase=ctrl.schedule.phase, stance=ctrl.schedule.stance_leg)
            ctrl_rows.append(info)
            for _ in range(sub):
                if k >= n_plant:
                    break
                x_prev = x
                try:
                    x = rk4_step(plant.derivative, x, cmd, config.dt_plant)
                    x[0:9] = reorthonormalize(x[0:9].reshape(3, 3)).reshape(9)
                except (IntegrationError, SingularConfigurationError) as exc:
                    raise SimulationError(k * config.dt_plant, str(exc)) from exc
                k += 1
                t = k * config.dt_plant
                t_log[k] = t
                states[k] = x
                forces = record_forces(k, evaluate(x, params, with_dynamics=False))
                if t < config.first_step_time or pending:
                    continue
                # the scheduler is checked every plant step
                sched = ctrl.schedule
                phase = sched.update(t)
                sw = 1 if sched.stance_leg == "L" else 0
                touchdown = forces[sw].contact and forces[sw].force[2] > config.touchdown_force
                if gait.switch_due(phase, touchdown, config.switch_window):
                    # the controller re-ticks at the switch; its grid restarts from here
                    pending = True
                    if touchdown and foot_height(x_prev, params, sw) > 0.0:
                        touchdown_from = (x_prev, cmd)
                    events.append((t, "touchdown" if touchdown else "forced switch without touchdown"))
                    break
    except SimulationError as exc:
        exc.log = _assemble(config, k, t_log, states, grf, contact_flags, ctrl_rows, stride_starts, events)
        raise
    return _assemble(config, k, t_log, states, grf, contact_flags, ctrl_rows, stride_starts, events)
