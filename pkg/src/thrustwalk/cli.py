"""``thrustwalk`` command line: simulate, check, bench-qp.

Exit codes: 0 success, 1 usage or config error, 2 simulation failure,
3 check-suite failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import checks, metrics, mpc, qp, rom
from .config import ConfigError, load_config
from .sim import STATE_NAMES, Controller, SimConfig, SimulationError, TrajectoryLog, initial_vector, simulate

EXIT_OK, EXIT_USAGE, EXIT_SIM, EXIT_CHECK = 0, 1, 2, 3

log = logging.getLogger("thrustwalk")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_logs(out: Path, log_: TrajectoryLog, config: SimConfig) -> None:
    """Deterministic CSV logs (no wall-clock columns)."""
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "states.csv", ["time", *STATE_NAMES], (np.concatenate([[t], x]) for t, x in zip(log_.t, log_.states)))

    side = ("L", "R")
    ctrl_header = (
        ["time", "stance", "phase"]
        + [f"u_{n}" for n in ("gamma_hL", "gamma_hR", "phi_hL", "phi_hR", "phi_kL_ddot", "phi_kR_ddot")]
        + [f"thrust_{s}_{a}" for s in side for a in "xyz"]
        + ["thrust_slope_x", "thrust_slope_z", "lambda_x", "lambda_z"]
        + ["x_ref", "x_dot_ref", "x", "x_dot"]
        + [f"swing_ref_{a}" for a in "xyz"]
    )
    _write_csv(
        out / "control.csv",
        ctrl_header,
        (
            [log_.t_ctrl[i], log_.stance[i], log_.phase[i], *log_.u_j[i], *log_.thrust[i], *log_.thrust_slope[i]]
            + [*log_.lambda_first[i], *log_.rom_ref[i], *log_.rom_x[i], *log_.swing_ref[i]]
            for i in range(len(log_.t_ctrl))
        ),
    )
    _write_csv(
        out / "grf.csv",
        ["time"] + [f"f{a}_{s}" for s in side for a in "xyz"] + ["contact_L", "contact_R"],
        ([log_.t[k], *log_.grf[k], *log_.contact[k]] for k in range(len(log_.t))),
    )
    N = config.mpc.N
    _write_csv(
        out / "qp.csv",
        ["time", "status", "iterations", "objective", "kkt_residual", "wbc_dynamics", "wbc_contact", "wbc_planar"]
        + [f"plan_{c}_{k}" for k in range(N) for c in ("lambda_x", "lambda_z")],
        (
            [log_.t_ctrl[i], log_.qp_status[i], log_.qp_iterations[i], log_.qp_objective[i], log_.qp_kkt[i]]
            + [*log_.wbc_residuals[i], *log_.lambda_plan[i].reshape(-1)]
            for i in range(len(log_.t_ctrl))
        ),
    )
    _write_csv(
        out / "strides.csv",
        ["time", "stance", "x_rel", "z_rel", "x_dot", "z_dot", *STATE_NAMES[12:18], *STATE_NAMES[24:30]],
        ([t, leg, *s] for t, leg, s in log_.stride_starts),
    )


def write_summary(path: Path, values: dict) -> None:
    path.write_text("".join(f"{k}: {_fmt(v)}\n" for k, v in values.items()))


def write_plots(out: Path, log_: TrajectoryLog, config: SimConfig) -> list[Path]:
    """Line plots of the main channels; skipped when matplotlib is missing."""
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        log.warning("matplotlib not installed; no plots written")
        return []
    paths = []

    def save(fig, name):
        p = out / name
        fig.tight_layout()
        fig.savefig(p, dpi=120)
        plt.close(fig)
        paths.append(p)

    t, tc = log_.t, log_.t_ctrl
    fig, ax = plt.subplots(2, 1, sharex=True, figsize=(8, 5))
    ax[0].plot(tc, log_.rom_x[:, 0], label="x")
    ax[0].plot(tc, log_.rom_ref[:, 0], "--", label="reference")
    ax[0].set_ylabel("position along slope [m]")
    ax[1].plot(t, metrics.sagittal_velocity(log_, config), label="velocity")
    ax[1].axhline(config.reference_speed, ls="--", color="k", label="reference")
    ax[1].set_ylabel("velocity [m/s]")
    ax[1].set_xlabel("time [s]")
    for a in ax:
        a.legend()
    save(fig, "body_tracking.png")

    fig, ax = plt.subplots(2, 1, sharex=True, figsize=(8, 5))
    ax[0].plot(tc, log_.lambda_first[:, 0], label="planned lambda_x")
    ax[0].plot(tc, log_.lambda_first[:, 1], label="planned lambda_z")
    ax[0].set_ylabel("force [N]")
    for i, s in enumerate("LR"):
        ax[1].plot(t, log_.grf[:, 3 * i + 2], label=f"plant f_z {s}")
        ax[1].plot(t, log_.grf[:, 3 * i], label=f"plant f_x {s}")
    ax[1].set_ylabel("force [N]")
    ax[1].set_xlabel("time [s]")
    for a in ax:
        a.legend(fontsize=8)
    save(fig, "ground_forces.png")

    fig, ax = plt.subplots(figsize=(8, 3))
    ax.plot(tc, log_.thrust_slope[:, 0], label="thrust along slope")
    ax.plot(tc, log_.thrust_slope[:, 1], label="thrust normal")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("force [N]")
    ax.legend()
    save(fig, "thrust.png")

    fig, ax = plt.subplots(3, 1, sharex=True, figsize=(8, 7))
    for row, (name, idx) in enumerate((("gamma_h", 12), ("phi_h", 14), ("phi_k", 16))):
        for j, s in enumerate("LR"):
            ax[row].plot(t, log_.states[:, idx + j], label=f"{name} {s}")
        ax[row].set_ylabel("[rad]")
        ax[row].legend()
    ax[-1].set_xlabel("time [s]")
    save(fig, "joint_angles.png")

    fig, ax = plt.subplots(figsize=(5, 5))
    for j, s in enumerate("LR"):
        ax.plot(log_.states[:, 14 + j], log_.states[:, 26 + j], lw=0.6, label=f"phi_h {s}")
    ax.set_xlabel("angle [rad]")
    ax.set_ylabel("rate [rad/s]")
    ax.legend()
    save(fig, "hip_phase_portrait.png")

    diffs = metrics.stride_differences(log_)
    if len(diffs):
        fig, ax = plt.subplots(figsize=(6, 3))
        ax.semilogy(np.arange(len(diffs)), diffs, "o-")
        ax.axhline(metrics.STRIDE_TOL, ls="--", color="k")
        ax.set_xlabel("stride")
        ax.set_ylabel("stride-start difference")
        save(fig, "stride_convergence.png")
    return paths


def _parse_overrides(items: list[str] | None) -> dict[str, str]:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _run_one(out: Path, config: SimConfig, plots: bool) -> int:
    t0 = time.perf_counter()
    code = EXIT_OK
    try:
        log_ = simulate(config)
    except SimulationError as exc:
        print(f"simulation failed: {exc}", file=sys.stderr)
        log_ = getattr(exc, "log", None)
        code = EXIT_SIM
        if log_ is None:
            return code
    wall = time.perf_counter() - t0
    try:
        write_logs(out, log_, config)
        values = {"status": "ok" if code == EXIT_OK else "failed", **metrics.summary(log_, config), "wall_time_s": wall}
        write_summary(out / "summary.txt", values)
        if plots:
            write_plots(out, log_, config)
    except OSError as exc:
        print(f"cannot write results to {out}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for k in ("status", "tracking_rms_velocity", "cone_violations_plan", "cone_violations_grf", "stride_convergence_index"):
        print(f"{k}: {_fmt(values[k])}")
    print(f"results in {out}")
    return code


def cmd_simulate(args) -> int:
    try:
        overrides = _parse_overrides(args.set)
        if args.duration is not None:
            overrides["duration"] = repr(args.duration)
        if args.seed is not None:
            overrides["seed"] = str(args.seed)
        runs = [(Path(args.out), overrides)]
        if args.sweep:
            key, _, values = args.sweep.partition("=")
            if not key or not values:
                raise ConfigError(f"--sweep expects key=a,b,c, got {args.sweep!r}")
            runs = [(Path(args.out) / f"{key.strip()}={v.strip()}", {**overrides, key.strip(): v.strip()}) for v in values.split(",")]
        configs = [(out, load_config(args.config, ov)) for out, ov in runs]
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return max(_run_one(out, cfg, args.plots) for out, cfg in configs)


def cmd_check(args) -> int:
    names = list(checks.SUITES) if args.suite == "all" else [args.suite]
    failed = []
    for name in names:
        for res in checks.run_suite(name, seed=args.seed):
            print(res.line())
            if not res.passed:
                failed.append(f"{res.suite}.{res.name}")
    if failed:
        print("failed: " + ", ".join(failed))
        return EXIT_CHECK
    print("all checks passed")
    return EXIT_OK


def capture_problems(horizon: int, duration: float = 1.0, config_path=None) -> list[qp.QpProblem]:
    """Condensed problems at ``horizon`` rebuilt from the ticks of a nominal run."""
    config = load_config(config_path, {"duration": repr(duration)})
    log_ = simulate(config)
    rp = Controller(config, initial_vector(config)).rom
    mcfg = mpc.MpcConfig(
        N=horizon,
        dt=config.mpc.dt,
        Q=config.mpc.Q,
        R=config.mpc.R,
        mu=config.mpc.mu,
        lambda_min=config.mpc.lambda_min,
        constraint_form=config.mpc.constraint_form,
    )
    v = config.reference_speed
    steps = np.arange(horizon + 1)
    problems = []
    for x_rel, xd, offset, lam_z in log_.mpc_input:
        X_d = np.column_stack([offset + v * mcfg.dt * steps, np.full(horizon + 1, v)])
        lin = rom.linearization((lam_z, x_rel, 0.0), rp, mcfg.dt)
        problems.append(mpc.build(np.array([x_rel, xd]), X_d, lin, mcfg).qp)
    return problems


def bench(problems: list[qp.QpProblem], trials: int) -> np.ndarray:
    times = np.empty(trials)
    for i in range(trials):
        times[i] = qp.solve(problems[i % len(problems)]).solve_time
    return times


def cmd_bench_qp(args) -> int:
    if args.horizon < 1 or args.trials < 1:
        print("horizon and trials must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        problems = capture_problems(args.horizon, config_path=args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SimulationError as exc:
        print(f"capture run failed: {exc}", file=sys.stderr)
        return EXIT_SIM
    qp.solve(problems[0])  # compile outside the timed loop
    times = 1e3 * bench(problems, args.trials)
    print(f"horizon: {args.horizon}")
    print(f"trials: {args.trials}")
    if args.trials == 1:
        print(f"solve_time_ms: {times[0]:.4f}")
    else:
        print(f"min_ms: {times.min():.4f}")
        print(f"median_ms: {np.median(times):.4f}")
        print(f"p99_ms: {np.percentile(times, 99):.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="thrustwalk", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log warnings from the controller")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the closed loop and write CSV logs")
    p.add_argument("--config", help="key = value config file (defaults when omitted)")
    p.add_argument("--out", default="run", help="output directory")
    p.add_argument("--duration", type=float, help="simulated seconds (overrides the config)")
    p.add_argument("--seed", type=int, help="rng seed (overrides the config)")
    p.add_argument("--plots", action="store_true", help="also write PNG plots")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="config override, repeatable")
    p.add_argument("--sweep", metavar="KEY=A,B,C", help="repeat the run for each value, one subdirectory each")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("check", help="compare against the reference oracles")
    p.add_argument("--suite", choices=[*checks.SUITES, "all"], default="all")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("bench-qp", help="time the condensed QP on problems from a nominal run")
    p.add_argument("--horizon", type=int, default=10)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--config", help="config for the capture run")
    p.set_defaults(func=cmd_bench_qp)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
