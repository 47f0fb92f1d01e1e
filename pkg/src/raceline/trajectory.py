"""Trajectory embeddings: fixed-length Bezier resamplings of driven paths.

A rollout path is moved into the vehicle frame (+y along the heading),
truncated to its forward-monotone prefix, fitted with one cubic Bezier,
and resampled at regular forward intervals. The x coordinates at those
intervals are the embedding. The same frame convention is shared with
the controllers, so embeddings can be mapped back to world points.
"""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import ExportError, HorizonError
from .evolve import EvolutionConfig, rollout
from .geometry import bezier_fit, is_monotone_in_y, resample_at_y
from .policy import MlpPolicy
from .track import (
    OccupancyGrid,
    TrackParams,
    centerline_tangents,
    generate_track,
    points_on_track,
    rasterize,
    sample_centerline,
    write_pgm,
)
from .validation import as_points, check_seed
from .vehicle import BicycleState, SensorConfig, VehicleParams

DEFAULT_K = 10
DEFAULT_Y_STEP = 15.0
DEFAULT_HORIZON_STEPS = 200

#: Points beyond the resample horizon by more than this many y-steps are
#: dropped before fitting, keeping the single cubic local to the horizon.
FIT_MARGIN_STEPS = 1.0

CROP_SIZE = 128


@dataclass(frozen=True)
class TrajectoryEmbedding:
    """x offsets at y = y_step .. k*y_step ahead, in the frame of ``frame``."""

    k: int
    y_step: float
    xs: np.ndarray
    frame: BicycleState

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not (np.isfinite(self.y_step) and self.y_step > 0):
            raise ValueError(f"y_step must be positive, got {self.y_step}")
        xs = np.ascontiguousarray(self.xs, dtype=np.float64)
        if xs.shape != (self.k,):
            raise ValueError(f"xs must have shape ({self.k},), got {xs.shape}")
        if not np.all(np.isfinite(xs)):
            raise ValueError("xs must be finite")
        xs.setflags(write=False)
        object.__setattr__(self, "xs", xs)

    @property
    def y_values(self) -> np.ndarray:
        return self.y_step * np.arange(1, self.k + 1)


def _rotation(yaw: float) -> np.ndarray:
    """World->vehicle rotation; +y vehicle axis is the heading direction."""
    s, c = math.sin(yaw), math.cos(yaw)
    return np.array([[s, -c], [c, s]])


def world_to_vehicle(points, pose: BicycleState) -> np.ndarray:
    pts = as_points(points)
    return (pts - [pose.x, pose.y]) @ _rotation(pose.yaw).T


def vehicle_to_world(points, pose: BicycleState) -> np.ndarray:
    pts = as_points(points)
    return pts @ _rotation(pose.yaw) + [pose.x, pose.y]


def embedding_world_points(embedding: TrajectoryEmbedding) -> np.ndarray:
    """The k embedding samples as world coordinates, (k, 2)."""
    local = np.stack([embedding.xs, embedding.y_values], axis=1)
    return vehicle_to_world(local, embedding.frame)


def _monotone_prefix(local: np.ndarray) -> np.ndarray:
    """Longest prefix with strictly increasing y.

    Exact duplicate points (the vehicle standing still) are dropped
    first; they are zero-length chords, not reversals.
    """
    if local.shape[0] > 1:
        moved = np.any(np.diff(local, axis=0) != 0.0, axis=1)
        local = local[np.concatenate([[True], moved])]
    dy = np.diff(local[:, 1])
    stop = np.argmax(dy <= 0.0) if np.any(dy <= 0.0) else dy.size
    return local[: stop + 1]


def path_to_embedding(
    path,
    pose: BicycleState,
    k: int = DEFAULT_K,
    y_step: float = DEFAULT_Y_STEP,
) -> TrajectoryEmbedding:
    """Fit and resample one path into its embedding.

    Raises HorizonError when the forward-monotone prefix does not span
    k*y_step, and also when the fitted cubic fails the resampler's
    monotonicity or range checks (both mean the path cannot support this
    horizon; the caller may retry with a smaller k).
    """
    pts = as_points(path, min_points=4, name="path")
    local = _monotone_prefix(world_to_vehicle(pts, pose))
    horizon = k * y_step
    top = local[-1, 1]
    if top < horizon:
        raise HorizonError(
            f"monotone path prefix reaches y={top:.1f} px, horizon needs {horizon:.1f}"
        )
    clipped = local[local[:, 1] <= horizon + FIT_MARGIN_STEPS * y_step]
    if clipped.shape[0] < 4:
        raise HorizonError(
            f"only {clipped.shape[0]} usable path points within the horizon"
        )
    curve = bezier_fit(clipped, degree=3)
    y_values = y_step * np.arange(1, k + 1, dtype=float)
    if not is_monotone_in_y(curve):
        raise HorizonError("fitted curve is not forward-monotone over the horizon")
    try:
        xs = resample_at_y(curve, y_values)
    except ValueError as exc:
        raise HorizonError(f"horizon resample failed: {exc}") from None
    return TrajectoryEmbedding(k=int(k), y_step=float(y_step), xs=xs, frame=pose)


def _rollout_config(
    horizon_steps: int,
    dt: float,
    vehicle: VehicleParams,
    sensor: SensorConfig,
) -> EvolutionConfig:
    return EvolutionConfig(
        n_spawns=2,
        m_survivors=1,
        generations=1,
        max_steps=int(horizon_steps),
        dt=dt,
        vehicle=vehicle,
        sensor=sensor,
    )


def oracle_generate(
    policy: MlpPolicy,
    grid: OccupancyGrid,
    pose: BicycleState,
    k: int = DEFAULT_K,
    y_step: float = DEFAULT_Y_STEP,
    horizon_steps: int = DEFAULT_HORIZON_STEPS,
    dt: float = 0.05,
    vehicle: VehicleParams | None = None,
    sensor: SensorConfig | None = None,
) -> TrajectoryEmbedding:
    """Plan ahead by letting the policy drive a short imagined rollout.

    Raises HorizonError (carrying steps_survived) when the rollout exits
    the track before covering the k*y_step horizon.
    """
    cfg = _rollout_config(
        horizon_steps, dt, vehicle or VehicleParams(), sensor or SensorConfig()
    )
    result = rollout(policy, grid, pose, cfg)
    path = result.path
    if result.terminated_off_track and path.shape[0] > 1:
        path = path[:-1]  # drop the crossing pose so the fit stays on-track
    if path.shape[0] < 4:
        raise HorizonError(
            f"rollout produced {path.shape[0]} on-track points",
            steps_survived=result.steps_survived,
        )
    try:
        return path_to_embedding(path, pose, k=k, y_step=y_step)
    except HorizonError as exc:
        raise HorizonError(str(exc), steps_survived=result.steps_survived) from None


@dataclass(frozen=True)
class ManifestEntry:
    crop_path: str
    embedding_row_index: int
    track_seed: int
    pose_x: float
    pose_y: float
    pose_yaw: float


def crop_grid(grid: OccupancyGrid, pose: BicycleState, size: int = CROP_SIZE) -> np.ndarray:
    """Local vehicle-aligned window: the heading points up (toward row 0).

    Crop pixel (r, c) samples vehicle-frame point (c - size/2, size/2 - r),
    so the vehicle sits at the center pixel.
    """
    half = size // 2
    vx, vy = np.meshgrid(
        np.arange(size, dtype=float) - half, half - np.arange(size, dtype=float)
    )
    local = np.stack([vx.ravel(), vy.ravel()], axis=1)
    world = vehicle_to_world(local, pose)
    return points_on_track(grid, world).reshape(size, size)


def _crop_contains(embedding: TrajectoryEmbedding, crop: np.ndarray, size: int) -> bool:
    """Embedding samples that fall inside the crop window must be drivable."""
    half = size // 2
    cols = np.round(embedding.xs + half).astype(int)
    rows = np.round(half - embedding.y_values).astype(int)
    inside = (rows >= 0) & (rows < size) & (cols >= 0) & (cols < size)
    return bool(np.all(crop[rows[inside], cols[inside]]))


def export_dataset(
    policy: MlpPolicy,
    track_seeds,
    samples_per_track: int,
    out_dir,
    k: int = DEFAULT_K,
    y_step: float = DEFAULT_Y_STEP,
    horizon_steps: int = DEFAULT_HORIZON_STEPS,
    dt: float = 0.05,
    vehicle: VehicleParams | None = None,
    sensor: SensorConfig | None = None,
    track_params: TrackParams | None = None,
) -> list[ManifestEntry]:
    """Write (grid crop, embedding) pairs for poses spaced along each track.

    Poses whose plan raises a horizon error, or whose embedding strays
    off the drivable region, are skipped and recorded in skipped.log.
    Raises ExportError when poses were requested but none succeeded.
    """
    if samples_per_track < 0:
        raise ValueError("samples_per_track must be >= 0")
    seeds = [check_seed(s) for s in track_seeds]
    os.makedirs(out_dir, exist_ok=True)
    vehicle = vehicle or VehicleParams()
    sensor = sensor or SensorConfig()

    entries: list[ManifestEntry] = []
    embeddings: list[np.ndarray] = []
    skipped: list[str] = []
    for seed in seeds:
        spec = generate_track(seed, track_params)
        grid = rasterize(spec)
        samples = sample_centerline(spec, spacing=1.0)
        tangents = centerline_tangents(samples)
        n = samples.shape[0]
        for j in range(samples_per_track):
            idx = (j * n) // samples_per_track
            pose = BicycleState(
                x=float(samples[idx, 0]),
                y=float(samples[idx, 1]),
                yaw=math.atan2(tangents[idx, 1], tangents[idx, 0]),
            )
            try:
                emb = oracle_generate(
                    policy,
                    grid,
                    pose,
                    k=k,
                    y_step=y_step,
                    horizon_steps=horizon_steps,
                    dt=dt,
                    vehicle=vehicle,
                    sensor=sensor,
                )
            except HorizonError as exc:
                skipped.append(f"seed={seed} sample={j} horizon: {exc}")
                continue
            world = embedding_world_points(emb)
            if not points_on_track(grid, world).all():
                skipped.append(f"seed={seed} sample={j} containment")
                continue
            crop = crop_grid(grid, pose)
            if not _crop_contains(emb, crop, CROP_SIZE):
                skipped.append(f"seed={seed} sample={j} crop containment")
                continue
            crop_name = f"crop_{seed}_{j:05d}.pgm"
            write_pgm(os.path.join(out_dir, crop_name), crop)
            entries.append(
                ManifestEntry(
                    crop_path=crop_name,
                    embedding_row_index=len(embeddings),
                    track_seed=seed,
                    pose_x=pose.x,
                    pose_y=pose.y,
                    pose_yaw=pose.yaw,
                )
            )
            embeddings.append(emb.xs)

    attempted = len(seeds) * samples_per_track
    if attempted > 0 and not entries:
        raise ExportError(f"all {attempted} poses failed to export")

    with open(os.path.join(out_dir, "embeddings.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i + 1}" for i in range(k)])
        for xs in embeddings:
            writer.writerow([repr(float(v)) for v in xs])
    with open(os.path.join(out_dir, "manifest.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["crop_path", "embedding_row_index", "track_seed", "pose_x", "pose_y", "pose_yaw"]
        )
        for e in entries:
            writer.writerow(
                [
                    e.crop_path,
                    e.embedding_row_index,
                    e.track_seed,
                    repr(e.pose_x),
                    repr(e.pose_y),
                    repr(e.pose_yaw),
                ]
            )
    if skipped:
        with open(os.path.join(out_dir, "skipped.log"), "w") as fh:
            fh.write("\n".join(skipped) + "\n")
    return entries


def read_manifest(out_dir) -> tuple[list[ManifestEntry], np.ndarray]:
    """Reload manifest rows and the embedding matrix written by export_dataset."""
    with open(os.path.join(out_dir, "manifest.csv"), newline="") as fh:
        rows = list(csv.DictReader(fh))
    entries = [
        ManifestEntry(
            crop_path=r["crop_path"],
            embedding_row_index=int(r["embedding_row_index"]),
            track_seed=int(r["track_seed"]),
            pose_x=float(r["pose_x"]),
            pose_y=float(r["pose_y"]),
            pose_yaw=float(r["pose_yaw"]),
        )
        for r in rows
    ]
    with open(os.path.join(out_dir, "embeddings.csv"), newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = np.array([[float(v) for v in row] for row in reader])
    if data.size == 0:
        data = data.reshape(0, len(header))
    return entries, data
