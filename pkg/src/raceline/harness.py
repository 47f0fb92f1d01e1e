"""Closed-loop benchmark harness: plan with the evolved oracle, track with
PID + Stanley, count laps, and report per-track statistics.

A lap is one forward crossing of the start line (the centerline normal
at the spawn point, one track-width plus margin long) after covering at
least 80% of the centerline arc length since the previous crossing. The
coverage guard stops oscillation across the line from double-counting.
"""
from __future__ import annotations

import csv
import math
import statistics
import time
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .config import RunConfig
from .control import track_trajectory
from .errors import HorizonError
from .policy import MlpPolicy, forward
from .track import OccupancyGrid, TrackSpec, generate_track, is_on_track, rasterize, sample_centerline
from .trajectory import TrajectoryEmbedding, embedding_world_points, oracle_generate
from .vehicle import BicycleState, sense, spawn_state, step

#: Fraction of centerline arc length required between counted crossings.
LAP_COVERAGE = 0.8

#: Smallest embedding horizon the replanner will fall back to.
MIN_FALLBACK_K = 4


@dataclass(frozen=True)
class TrackResult:
    """One benchmark row; track_seed is "aggregate" for the summary row."""

    track_seed: int | str
    successful_laps: int
    t_lap_avg: float | None
    t_first_failure: float | None
    distance_covered: float


@dataclass(frozen=True)
class BenchmarkReport:
    rows: list[TrackResult]
    aggregate: TrackResult


class LapTracker:
    """Counts forward start-line crossings gated by arc-length coverage."""

    def __init__(self, samples: np.ndarray, width: float):
        self._samples = samples
        seg = np.diff(np.vstack([samples, samples[:1]]), axis=0)
        seg_len = np.hypot(seg[:, 0], seg[:, 1])
        self._arc = np.concatenate([[0.0], np.cumsum(seg_len[:-1])])
        self.total_length = float(seg_len.sum())
        self._tree = cKDTree(samples)

        start = samples[0]
        tangent = seg[0] / seg_len[0]
        normal = np.array([-tangent[1], tangent[0]])
        half = width / 2.0 + 1.0
        self._line_a = start - half * normal
        self._line_b = start + half * normal
        self._forward = tangent

        self.coverage = 0.0
        self.laps = 0
        self.lap_times: list[float] = []
        self._last_s = 0.0

    def _progress(self, p: np.ndarray) -> float:
        _, idx = self._tree.query(p)
        return float(self._arc[idx])

    @staticmethod
    def _cross2(u: np.ndarray, w: np.ndarray) -> float:
        return float(u[0] * w[1] - u[1] * w[0])

    def _crossed(self, p0: np.ndarray, p1: np.ndarray) -> bool:
        a, b = self._line_a, self._line_b
        d1 = self._cross2(b - a, p0 - a)
        d2 = self._cross2(b - a, p1 - a)
        d3 = self._cross2(p1 - p0, a - p0)
        d4 = self._cross2(p1 - p0, b - p0)
        if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)):
            return float(np.dot(p1 - p0, self._forward)) > 0.0
        return False

    def update(self, p0: np.ndarray, p1: np.ndarray, t: float) -> None:
        """Advance with one motion segment ending at time t."""
        s = self._progress(p1)
        ds = s - self._last_s
        if ds > self.total_length / 2.0:
            ds -= self.total_length
        elif ds < -self.total_length / 2.0:
            ds += self.total_length
        self.coverage += ds
        self._last_s = s
        if self.coverage >= LAP_COVERAGE * self.total_length and self._crossed(p0, p1):
            self.laps += 1
            self.lap_times.append(t)
            self.coverage = 0.0


def _replan(
    policy: MlpPolicy, grid: OccupancyGrid, state: BicycleState, cfg: RunConfig
) -> TrajectoryEmbedding:
    """Plan at the configured horizon, stepping k down on horizon errors."""
    last: HorizonError | None = None
    for k in range(cfg.k, min(cfg.k, MIN_FALLBACK_K) - 1, -1):
        try:
            return oracle_generate(
                policy,
                grid,
                state,
                k=k,
                y_step=cfg.y_step,
                horizon_steps=cfg.horizon_steps,
                dt=cfg.dt,
                vehicle=cfg.vehicle_params(),
                sensor=cfg.sensor_config(),
            )
        except HorizonError as exc:
            last = exc
    raise HorizonError(
        f"replanning failed down to k={MIN_FALLBACK_K}: {last}",
        steps_survived=getattr(last, "steps_survived", None),
    )


def run_closed_loop(
    policy: MlpPolicy,
    grid: OccupancyGrid,
    spec: TrackSpec,
    cfg: RunConfig,
    collect_embeddings: bool = False,
):
    """Drive until laps_target, off-track, replan dead-end, or step cap.

    Returns (TrackResult, pose_log) where pose_log rows are
    (t, x, y, yaw, v); with collect_embeddings also returns the list of
    plans used (for replay rendering).
    """
    state = spawn_state(spec)
    gains = cfg.pid_gains()
    stanley = cfg.stanley_params()
    vehicle = cfg.vehicle_params()
    tracker = LapTracker(sample_centerline(spec, spacing=1.0), spec.width)
    max_age = cfg.replan_interval * cfg.dt + 1e-9

    log = [(state.t, state.x, state.y, state.yaw, state.v)]
    embeddings: list[TrajectoryEmbedding] = []
    embedding: TrajectoryEmbedding | None = None
    distance = 0.0
    t_first_failure = None

    for step_i in range(cfg.step_cap):
        if not is_on_track(grid, (state.x, state.y)):
            t_first_failure = state.t
            break
        if step_i % cfg.replan_interval == 0:
            try:
                embedding = _replan(policy, grid, state, cfg)
            except HorizonError:
                t_first_failure = state.t
                break
            if collect_embeddings:
                embeddings.append(embedding)
        cmd, gains = track_trajectory(
            state,
            embedding,
            gains,
            stanley,
            vehicle,
            lookahead_idx=cfg.lookahead_idx,
            target_gap=cfg.target_gap,
            max_age=max_age,
        )
        new_state = step(state, vehicle, cmd, cfg.dt)
        p0 = np.array([state.x, state.y])
        p1 = np.array([new_state.x, new_state.y])
        distance += float(np.hypot(*(p1 - p0)))
        tracker.update(p0, p1, new_state.t)
        state = new_state
        log.append((state.t, state.x, state.y, state.yaw, state.v))
        if tracker.laps >= cfg.laps_target:
            break

    laps = tracker.laps
    t_lap_avg = tracker.lap_times[-1] / laps if laps >= 1 else None
    result = TrackResult(
        track_seed=spec.seed,
        successful_laps=laps,
        t_lap_avg=t_lap_avg,
        t_first_failure=t_first_failure,
        distance_covered=distance,
    )
    pose_log = np.array(log)
    if collect_embeddings:
        return result, pose_log, embeddings
    return result, pose_log


def run_benchmark(policy: MlpPolicy, track_seeds, cfg: RunConfig) -> BenchmarkReport:
    """run_closed_loop on every seed plus an aggregate row."""
    if len(track_seeds) < 1:
        raise ValueError("at least one track seed is required")
    rows = []
    params = cfg.track_params()
    for seed in track_seeds:
        spec = generate_track(seed, params)
        grid = rasterize(spec)
        row, _ = run_closed_loop(policy, grid, spec, cfg)
        rows.append(row)

    lap_avgs = [r.t_lap_avg for r in rows if r.successful_laps >= 1]
    failures = [r.t_first_failure for r in rows if r.t_first_failure is not None]
    aggregate = TrackResult(
        track_seed="aggregate",
        successful_laps=sum(r.successful_laps for r in rows),
        t_lap_avg=math.fsum(lap_avgs) / len(lap_avgs) if lap_avgs else None,
        t_first_failure=math.fsum(failures) / len(failures) if failures else None,
        distance_covered=math.fsum(r.distance_covered for r in rows),
    )
    return BenchmarkReport(rows=rows, aggregate=aggregate)


def write_report_csv(path, report: BenchmarkReport) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["track_seed", "successful_laps", "t_lap_avg", "t_first_failure", "distance_covered"]
        )
        for row in report.rows + [report.aggregate]:
            writer.writerow(
                [
                    row.track_seed,
                    row.successful_laps,
                    "" if row.t_lap_avg is None else repr(row.t_lap_avg),
                    "" if row.t_first_failure is None else repr(row.t_first_failure),
                    repr(row.distance_covered),
                ]
            )


def read_report_csv(path) -> BenchmarkReport:
    with open(path, newline="") as fh:
        raw = list(csv.DictReader(fh))
    rows = []
    for r in raw:
        seed = r["track_seed"]
        rows.append(
            TrackResult(
                track_seed=seed if seed == "aggregate" else int(seed),
                successful_laps=int(r["successful_laps"]),
                t_lap_avg=float(r["t_lap_avg"]) if r["t_lap_avg"] else None,
                t_first_failure=float(r["t_first_failure"]) if r["t_first_failure"] else None,
                distance_covered=float(r["distance_covered"]),
            )
        )
    return BenchmarkReport(rows=rows[:-1], aggregate=rows[-1])


def write_ppm(path, rgb: np.ndarray) -> None:
    """Binary P6 image from an (rows, cols, 3) uint8 array."""
    rgb = np.ascontiguousarray(rgb, dtype=np.uint8)
    rows, cols, _ = rgb.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{cols} {rows}\n255\n".encode("ascii"))
        fh.write(rgb.tobytes())


def _paint(rgb: np.ndarray, points: np.ndarray, color) -> None:
    r = np.floor(points[:, 1] + 0.5).astype(int)
    c = np.floor(points[:, 0] + 0.5).astype(int)
    ok = (r >= 0) & (r < rgb.shape[0]) & (c >= 0) & (c < rgb.shape[1])
    rgb[r[ok], c[ok]] = color


def render_replay(pose_log: np.ndarray, grid: OccupancyGrid, out_prefix, embeddings=None) -> list[str]:
    """Write an overlay image and a pose CSV; returns the paths written.

    Track cells are white, the driven path red, embedding samples blue.
    """
    pose_log = np.asarray(pose_log, dtype=float)
    if pose_log.ndim != 2 or pose_log.shape[0] < 1 or pose_log.shape[1] < 3:
        raise ValueError("pose log must be (n >= 1, >= 3) with t, x, y columns")
    rgb = np.zeros((grid.rows, grid.cols, 3), dtype=np.uint8)
    rgb[grid.cells] = (255, 255, 255)
    if embeddings:
        for emb in embeddings:
            _paint(rgb, embedding_world_points(emb), (40, 90, 255))
    _paint(rgb, pose_log[:, 1:3], (220, 30, 30))

    image_path = f"{out_prefix}.ppm"
    csv_path = f"{out_prefix}_poses.csv"
    write_ppm(image_path, rgb)
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "x", "y", "yaw", "v"][: pose_log.shape[1]])
        for row in pose_log:
            writer.writerow([repr(float(v)) for v in row])
    return [image_path, csv_path]


def measure_planner_rate(
    policy: MlpPolicy,
    grid: OccupancyGrid,
    poses: list[BicycleState],
    reps: int,
    cfg: RunConfig | None = None,
) -> float:
    """Median rate (plans/second) of the sense -> forward -> plan pipeline.

    One warm call happens outside the timed region so compilation cost is
    not measured. Failed plans (horizon errors) still count toward the
    time spent; they do the same sensing and rollout work.
    """
    if reps < 100:
        raise ValueError(f"reps must be >= 100, got {reps}")
    if not poses:
        raise ValueError("at least one pose is required")
    cfg = cfg or RunConfig()
    sensor = cfg.sensor_config()
    vehicle = cfg.vehicle_params()

    def pipeline(pose: BicycleState) -> None:
        readings = sense(pose, grid, sensor)
        forward(policy, readings / sensor.range_cap)
        try:
            oracle_generate(
                policy,
                grid,
                pose,
                k=cfg.k,
                y_step=cfg.y_step,
                horizon_steps=cfg.horizon_steps,
                dt=cfg.dt,
                vehicle=vehicle,
                sensor=sensor,
            )
        except HorizonError:
            pass

    pipeline(poses[0])
    times = []
    for i in range(reps):
        pose = poses[i % len(poses)]
        t0 = time.perf_counter()
        pipeline(pose)
        times.append(time.perf_counter() - t0)
    return 1.0 / statistics.median(times)
