"""Command-line entry points: run, serve, plot-data, check."""

from __future__ import annotations

import argparse
import asyncio
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .operator import ScriptedOperatorConfig, default_waypoints
from .scenario import GeometryError, SchemaError, resolve_scenario
from .session import (
    DC_BASELINE_SPEED_KMH,
    DC_BASELINE_TOTAL_S,
    METRICS_CSV_HEADER,
    run_session,
)
from .trajectory import build_trajectory
from .vehicle import VehicleParams, check_trajectory

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_REJECTED = 2
EXIT_MRM_TERMINATED = 3
EXIT_TIMEOUT = 4


def _parse_blackouts(text: str) -> tuple[tuple[float, float], ...]:
    windows = []
    for part in text.split(","):
        a, _, b = part.partition(":")
        windows.append((float(a), float(b)))
    return tuple(windows)


def _apply_overrides(scenario, args):
    limits = scenario.limits
    channel = scenario.channel
    if getattr(args, "vmax", None) is not None:
        limits = dataclasses.replace(limits, v_max=args.vmax / 3.6)
    changes = {}
    if getattr(args, "loss", None) is not None:
        changes["loss_prob"] = args.loss
    if getattr(args, "delay", None) is not None:
        changes["base_delay_ms"] = args.delay
    if getattr(args, "jitter", None) is not None:
        changes["jitter_ms"] = args.jitter
    if getattr(args, "blackout", None):
        changes["blackout_windows"] = _parse_blackouts(args.blackout)
    if changes:
        channel = dataclasses.replace(channel, **changes)
    return dataclasses.replace(scenario, limits=limits, channel=channel)


def cmd_run(args) -> int:
    scenario = _apply_overrides(resolve_scenario(args.scenario), args)
    cfg = ScriptedOperatorConfig()
    if args.waypoints:
        data = json.loads(Path(args.waypoints).read_text())
        cfg.waypoints = [tuple(map(float, wp)) for wp in data["waypoints"]]
    if args.estop_after is not None:
        cfg.estop_after_tracking_ms = args.estop_after
    result = run_session(scenario, operator_cfg=cfg, seed=args.seed,
                         sim_timeout_s=args.timeout)
    m = result.metrics
    out = Path(args.out)
    out.write_text(m.to_csv())
    if args.record:
        Path(args.record).write_text(result.vehicle.record.to_csv())
    print(METRICS_CSV_HEADER)
    print(m.csv_row())
    print(f"# exit_reason={result.exit_reason} sim_time_s={result.sim_time_s:.2f} "
          f"dc_baseline_total_s={DC_BASELINE_TOTAL_S} dc_baseline_speed_kmh={DC_BASELINE_SPEED_KMH}")
    if result.exit_reason == "completed":
        return EXIT_OK
    if result.exit_reason in ("rejected", "planning_failed"):
        return EXIT_REJECTED
    if m.n_mrm > 0:
        return EXIT_MRM_TERMINATED
    return EXIT_TIMEOUT


def cmd_serve(args) -> int:
    from .bridge import BindError, serve_ui

    scenario = _apply_overrides(resolve_scenario(args.scenario), args)
    static = args.static
    if static is None:
        bundled = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        static = str(bundled) if bundled.is_dir() else None
    try:
        asyncio.run(serve_ui(scenario, bind=args.bind, seed=args.seed,
                             static_dir=static, realtime=args.speed))
    except BindError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        pass
    return EXIT_OK


def cmd_plot_data(args) -> int:
    scenario = _apply_overrides(resolve_scenario(args.scenario), args)
    result = run_session(scenario, seed=args.seed, sim_timeout_s=args.timeout)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    rec = result.vehicle.record
    with open(outdir / "path.csv", "w") as f:
        f.write("t_s,x_m,y_m,s_progress_m\n")
        for i in range(len(rec.t)):
            f.write(f"{rec.t[i]:.6f},{rec.x[i]:.6f},{rec.y[i]:.6f},{rec.s_progress[i]:.6f}\n")

    wps = default_waypoints(scenario)
    traj = build_trajectory(wps, scenario.limits, traj_id="plot")
    with open(outdir / "velocity.csv", "w") as f:
        f.write("t_s,s_m,v_kmh,v_ref_kmh\n")
        ref_v = np.interp(rec.s_progress, traj.s, traj.v) * 3.6
        for i in range(len(rec.t)):
            f.write(f"{rec.t[i]:.6f},{rec.s_progress[i]:.6f},{rec.v[i] * 3.6:.6f},{ref_v[i]:.6f}\n")

    m = result.metrics
    with open(outdir / "timing.csv", "w") as f:
        f.write("metric,value\n")
        f.write(f"t_plan_s,{m.t_plan_s:.6f}\n")
        f.write(f"t_drive_s,{m.t_drive_s:.6f}\n")
        f.write(f"t_total_s,{m.t_total_s:.6f}\n")
        f.write(f"v_mean_kmh,{m.v_mean_kmh:.6f}\n")
        f.write(f"dc_baseline_total_s,{DC_BASELINE_TOTAL_S}\n")
        f.write(f"dc_baseline_speed_kmh,{DC_BASELINE_SPEED_KMH}\n")
    print(f"wrote {outdir}/path.csv {outdir}/velocity.csv {outdir}/timing.csv")
    return EXIT_OK if result.exit_reason == "completed" else EXIT_TIMEOUT


def cmd_check(args) -> int:
    scenario = _apply_overrides(resolve_scenario(args.scenario), args)
    data = json.loads(Path(args.waypoints).read_text())
    wps = [tuple(map(float, wp)) for wp in data["waypoints"]]
    try:
        traj = build_trajectory(wps, scenario.limits, traj_id="check")
    except Exception as e:
        print(f"rejected: cannot build trajectory: {e}")
        return EXIT_REJECTED
    report = check_trajectory(traj, VehicleParams(), scenario)
    print(json.dumps(report.to_payload("check"), indent=2))
    return EXIT_OK if report.ok else EXIT_REJECTED


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tgsim",
                                 description="Trajectory-guidance teleoperation simulator")
    sub = ap.add_subparsers(dest="cmd", required=True)

    def common(p):
        p.add_argument("--scenario", default="construction_site",
                       help="scenario file path or bundled name")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--vmax", type=float, default=None, help="speed limit, km/h")
        p.add_argument("--loss", type=float, default=None, help="per-message drop probability")
        p.add_argument("--delay", type=float, default=None, help="one-way link delay, ms")
        p.add_argument("--jitter", type=float, default=None, help="link jitter bound, ms")
        p.add_argument("--blackout", default=None,
                       help="blackout windows 'start:end[,start:end...]' in ms")
        p.add_argument("--timeout", type=float, default=600.0, help="simulated time limit, s")

    p = sub.add_parser("run", help="headless scripted session")
    common(p)
    p.add_argument("--out", default="metrics.csv")
    p.add_argument("--record", default=None, help="also write the run record CSV")
    p.add_argument("--waypoints", default=None, help="JSON file with scripted waypoints")
    p.add_argument("--estop-after", type=float, default=None, dest="estop_after",
                   help="inject an operator e-stop N ms after tracking starts")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("serve", help="serve the operator UI over WebSocket")
    common(p)
    p.add_argument("--bind", default="127.0.0.1:8765")
    p.add_argument("--static", default=None, help="directory with the UI bundle")
    p.add_argument("--speed", type=float, default=1.0, help="pacing multiplier")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("plot-data", help="emit path/velocity/timing CSVs for a run")
    common(p)
    p.add_argument("--outdir", default="plots")
    p.set_defaults(fn=cmd_plot_data)

    p = sub.add_parser("check", help="validate a waypoint file against a scenario")
    common(p)
    p.add_argument("--waypoints", required=True)
    p.set_defaults(fn=cmd_check)
    return ap


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("TG_LOG_LEVEL", "WARNING"))
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (SchemaError, GeometryError, FileNotFoundError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
