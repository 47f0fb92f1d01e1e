"""Command-line entry point.

Subcommands: generate-track, train, plan, benchmark, export-dataset,
replay, rate. Exit codes: 0 success, 1 usage error, 2 run failure.
"""
from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace

from .config import RunConfig, load_config
from .errors import ExportError, HorizonError, TrackGenerationError
from .evolve import train, write_stats_csv
from .harness import (
    measure_planner_rate,
    render_replay,
    run_benchmark,
    run_closed_loop,
    write_report_csv,
)
from .policy import load_policy, save_policy
from .track import (
    centerline_tangents,
    generate_track,
    load_track,
    rasterize,
    sample_centerline,
    save_track,
)
from .trajectory import export_dataset, oracle_generate
from .vehicle import BicycleState


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _seeds(raw: str) -> list[int]:
    try:
        return [int(part) for part in raw.split(",") if part.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {raw!r}") from None


def _pose(raw: str) -> tuple[float, ...]:
    parts = [float(p) for p in raw.split(",")]
    if len(parts) not in (3, 4):
        raise argparse.ArgumentTypeError("pose must be x,y,yaw or x,y,yaw,v")
    return tuple(parts)


def _load_cfg(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, master_seed=args.seed)
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="raceline", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-track", parents=[], help="write a track PGM + metadata")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--width", type=float, default=None)
    p.add_argument("--size", type=int, default=None)
    p.add_argument("--knots", type=int, default=None)
    p.add_argument("--jitter", type=float, default=None)

    p = sub.add_parser("train", help="evolve a policy, write policy.bin and stats.csv")
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--stats", required=True)
    p.add_argument("--seed", type=int, default=None, help="override master seed")

    p = sub.add_parser("plan", help="print one embedding from a PGM and a pose")
    p.add_argument("--policy", required=True)
    p.add_argument("--track", required=True, help="track PGM path")
    p.add_argument("--pose", type=_pose, required=True, help="x,y,yaw[,v]")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None, help="write xs as CSV instead of stdout")

    p = sub.add_parser("benchmark", help="closed-loop lap benchmark over track seeds")
    p.add_argument("--policy", required=True)
    p.add_argument("--seeds", type=_seeds, required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None, help="report CSV path")

    p = sub.add_parser("export-dataset", help="write OGM crop / embedding pairs")
    p.add_argument("--policy", required=True)
    p.add_argument("--seeds", type=_seeds, required=True)
    p.add_argument("--per-track", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)

    p = sub.add_parser("replay", help="run one track and render the driven path")
    p.add_argument("--policy", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="output path prefix")
    p.add_argument("--config", default=None)

    p = sub.add_parser("rate", help="measure the replanning pipeline rate")
    p.add_argument("--policy", required=True)
    p.add_argument("--seed", type=int, default=0, help="track seed for test poses")
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--config", default=None)
    return parser


def _cmd_generate_track(args) -> int:
    cfg = RunConfig()
    params = cfg.track_params()
    updates = {}
    if args.width is not None:
        updates["width"] = args.width
    if args.size is not None:
        updates["grid_size"] = (args.size, args.size)
    if args.knots is not None:
        updates["n_knots"] = args.knots
    if args.jitter is not None:
        updates["jitter"] = args.jitter
    if updates:
        params = replace(params, **updates)
    spec = generate_track(args.seed, params)
    grid = rasterize(spec)
    save_track(args.out, grid, spec)
    print(f"wrote {args.out} ({grid.rows}x{grid.cols}, seed {spec.seed})")
    return 0


def _cmd_train(args) -> int:
    cfg = _load_cfg(args)
    policy, stats = train(cfg.evolution_config())
    save_policy(args.out, policy)
    write_stats_csv(args.stats, stats)
    last = stats[-1]
    print(
        f"trained {cfg.generations} generations; "
        f"best fitness {last.best_fitness:.1f}; wrote {args.out}, {args.stats}"
    )
    return 0


def _cmd_plan(args) -> int:
    cfg = _load_cfg(args)
    policy = load_policy(args.policy)
    grid, _ = load_track(args.track)
    x, y, yaw, *rest = args.pose
    pose = BicycleState(x=x, y=y, yaw=yaw, v=rest[0] if rest else 0.0)
    emb = oracle_generate(
        policy,
        grid,
        pose,
        k=cfg.k,
        y_step=cfg.y_step,
        horizon_steps=cfg.horizon_steps,
        dt=cfg.dt,
        vehicle=cfg.vehicle_params(),
        sensor=cfg.sensor_config(),
    )
    line = ",".join(repr(float(v)) for v in emb.xs)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(line + "\n")
    else:
        print(line)
    return 0


def _cmd_benchmark(args) -> int:
    cfg = _load_cfg(args)
    policy = load_policy(args.policy)
    report = run_benchmark(policy, args.seeds, cfg)
    if args.out:
        write_report_csv(args.out, report)
    for row in report.rows + [report.aggregate]:
        lap = "-" if row.t_lap_avg is None else f"{row.t_lap_avg:.1f}s"
        fail = "-" if row.t_first_failure is None else f"{row.t_first_failure:.1f}s"
        print(
            f"{row.track_seed}: laps={row.successful_laps} t_lap_avg={lap} "
            f"t_first_failure={fail} distance={row.distance_covered:.0f}px"
        )
    if report.aggregate.successful_laps == 0:
        print("benchmark failed on every track", file=sys.stderr)
        return 2
    return 0


def _cmd_export_dataset(args) -> int:
    cfg = _load_cfg(args)
    policy = load_policy(args.policy)
    entries = export_dataset(
        policy,
        args.seeds,
        args.per_track,
        args.out,
        k=cfg.k,
        y_step=cfg.y_step,
        horizon_steps=cfg.horizon_steps,
        dt=cfg.dt,
        vehicle=cfg.vehicle_params(),
        sensor=cfg.sensor_config(),
        track_params=cfg.track_params(),
    )
    print(f"exported {len(entries)} samples to {args.out}")
    return 0


def _cmd_replay(args) -> int:
    cfg = _load_cfg(args)
    policy = load_policy(args.policy)
    spec = generate_track(args.seed, cfg.track_params())
    grid = rasterize(spec)
    result, pose_log, embeddings = run_closed_loop(
        policy, grid, spec, cfg, collect_embeddings=True
    )
    paths = render_replay(pose_log, grid, args.out, embeddings=embeddings)
    print(
        f"laps={result.successful_laps} distance={result.distance_covered:.0f}px; "
        f"wrote {', '.join(paths)}"
    )
    return 0


def _cmd_rate(args) -> int:
    cfg = _load_cfg(args)
    policy = load_policy(args.policy)
    spec = generate_track(args.seed, cfg.track_params())
    grid = rasterize(spec)
    samples = sample_centerline(spec, spacing=1.0)
    tangents = centerline_tangents(samples)
    poses = [
        BicycleState(
            x=float(samples[i, 0]),
            y=float(samples[i, 1]),
            yaw=math.atan2(tangents[i, 1], tangents[i, 0]),
            v=30.0,
        )
        for i in range(0, samples.shape[0], max(1, samples.shape[0] // 16))
    ]
    rate = measure_planner_rate(policy, grid, poses, reps=args.reps, cfg=cfg)
    print(f"planner rate: {rate:.0f} plans/s (median of {args.reps} reps)")
    return 0


_COMMANDS = {
    "generate-track": _cmd_generate_track,
    "train": _cmd_train,
    "plan": _cmd_plan,
    "benchmark": _cmd_benchmark,
    "export-dataset": _cmd_export_dataset,
    "replay": _cmd_replay,
    "rate": _cmd_rate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (TrackGenerationError, ExportError, HorizonError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
