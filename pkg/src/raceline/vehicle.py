"""Kinematic bicycle dynamics and ray-cast ranging sensors.

The state update and ray casting are compiled kernels (see _sim); the
wrappers here add validation and the dataclass plumbing. Angles follow
the grid convention: yaw 0 points toward +x (increasing column), yaw
pi/2 toward +y (increasing row, i.e. downward on screen).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _sim
from .track import OccupancyGrid, TrackSpec, centerline_tangents, sample_centerline
from .validation import check_finite, check_scalar

DEFAULT_DT = 0.05


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    return math.pi - ((math.pi - a) % (2.0 * math.pi))


@dataclass(frozen=True)
class VehicleParams:
    """Geometry and actuation limits; mass is carried as metadata only."""

    l_f: float = 1.3
    l_r: float = 1.3
    mass: float = 1.5
    a_max: float = 40.0
    steer_max: float = 0.45
    drag: float = 0.3
    v_max: float = 80.0

    def __post_init__(self):
        check_scalar("l_f", self.l_f, low=0.0)
        check_scalar("l_r", self.l_r, low=0.0)
        if self.l_f <= 0 or self.l_r <= 0:
            raise ValueError("axle distances must be positive")
        check_scalar("a_max", self.a_max)
        if self.a_max <= 0:
            raise ValueError("a_max must be positive")
        if not 0.0 < self.steer_max <= math.pi / 3:
            raise ValueError(f"steer_max must be in (0, pi/3], got {self.steer_max}")
        check_scalar("drag", self.drag, low=0.0)
        check_scalar("v_max", self.v_max)
        if self.v_max <= 0:
            raise ValueError("v_max must be positive")


@dataclass(frozen=True)
class BicycleState:
    """Pose, speed, and elapsed time of one vehicle."""

    x: float
    y: float
    yaw: float
    v: float = 0.0
    t: float = 0.0

    def __post_init__(self):
        for name in ("x", "y", "yaw", "v", "t"):
            check_finite(name, getattr(self, name))
        if self.v < 0:
            raise ValueError(f"v must be >= 0, got {self.v}")
        object.__setattr__(self, "yaw", wrap_angle(float(self.yaw)))

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class ControlCommand:
    """Normalized actuation; both components are clamped to [-1, 1]."""

    steer: float = 0.0
    throttle: float = 0.0

    def __post_init__(self):
        check_finite("steer", self.steer)
        check_finite("throttle", self.throttle)
        object.__setattr__(self, "steer", float(np.clip(self.steer, -1.0, 1.0)))
        object.__setattr__(self, "throttle", float(np.clip(self.throttle, -1.0, 1.0)))


@dataclass(frozen=True)
class SensorConfig:
    """Fan of distance rays around the heading, capped at range_cap."""

    n_v: int = 7
    beta_offset: float = math.pi / 6
    range_cap: float = 150.0

    def __post_init__(self):
        if self.n_v < 2 or self.n_v % 2 == 0:
            raise ValueError(f"n_v must be odd and >= 3, got {self.n_v}")
        check_scalar("beta_offset", self.beta_offset)
        if self.beta_offset <= 0:
            raise ValueError("beta_offset must be positive")
        if (self.n_v - 1) * self.beta_offset > math.pi + 1e-12:
            raise ValueError("ray fan exceeds a half turn")
        check_scalar("range_cap", self.range_cap)
        if self.range_cap <= 0:
            raise ValueError("range_cap must be positive")


def slip_angle(params: VehicleParams, steer: float) -> float:
    """Slip angle for a normalized steer command in [-1, 1]."""
    delta = float(np.clip(steer, -1.0, 1.0)) * params.steer_max
    return math.atan(params.l_r * math.tan(delta) / (params.l_f + params.l_r))


def step(
    state: BicycleState,
    params: VehicleParams,
    cmd: ControlCommand,
    dt: float = DEFAULT_DT,
) -> BicycleState:
    """Advance one explicit-Euler step.

    dt is normally positive and at most 0.1 s; a negative dt (same
    magnitude bound) integrates backward, which inverts a drag-free
    coasting step exactly.
    """
    check_finite("dt", dt)
    if dt == 0.0 or abs(dt) > 0.1:
        raise ValueError(f"dt must be nonzero with |dt| <= 0.1, got {dt}")
    x, y, yaw, v = _sim._step(
        float(state.x),
        float(state.y),
        float(state.yaw),
        float(state.v),
        float(cmd.steer),
        float(cmd.throttle),
        params.l_f,
        params.l_r,
        params.a_max,
        params.steer_max,
        params.v_max,
        params.drag,
        float(dt),
    )
    return replace(state, x=x, y=y, yaw=yaw, v=v, t=state.t + dt)


def sense(state: BicycleState, grid: OccupancyGrid, cfg: SensorConfig) -> np.ndarray:
    """Capped ray distances at 0.05 px resolution, length n_v.

    All zeros when the pose itself is off-track.
    """
    out = np.empty(cfg.n_v, dtype=np.float64)
    _sim._sense_into(
        grid.cells,
        float(state.x),
        float(state.y),
        float(state.yaw),
        cfg.beta_offset,
        cfg.range_cap,
        out,
    )
    return out


def spawn_state(spec: TrackSpec) -> BicycleState:
    """Rest state at the first centerline sample, heading along the loop."""
    samples = sample_centerline(spec)
    tangents = centerline_tangents(samples)
    x, y = samples[0]
    tx, ty = tangents[0]
    return BicycleState(x=float(x), y=float(y), yaw=math.atan2(ty, tx), v=0.0, t=0.0)
