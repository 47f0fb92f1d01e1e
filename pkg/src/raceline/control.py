"""Longitudinal PID and lateral Stanley control over a trajectory embedding.

Sign conventions (world y points down, yaw increases turning toward +y):
a positive cross-track error e_fa means the front axle sits to the LEFT
of the path, and a positive steer command turns right, so positive e_fa
must produce positive steer. The heading-error term enters with a minus
sign for the same reason: heading rotated right of the path (theta_e > 0)
needs a left correction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import StaleEmbeddingError
from .trajectory import TrajectoryEmbedding, embedding_world_points, world_to_vehicle
from .validation import check_finite
from .vehicle import BicycleState, ControlCommand, VehicleParams, wrap_angle

DEFAULT_LOOKAHEAD_IDX = 2
DEFAULT_TARGET_GAP = 30.0


@dataclass(frozen=True)
class PidGains:
    """PID coefficients plus the controller's running state."""

    kp: float = 1.0
    ki: float = 0.0
    kd: float = 0.1
    dt: float = 0.05
    integral_state: float = 0.0
    prev_error: float = 0.0
    integral_cap: float = 10.0

    def __post_init__(self):
        for name in ("kp", "ki", "kd"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {value}")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not (np.isfinite(self.integral_cap) and self.integral_cap > 0):
            raise ValueError(f"integral_cap must be positive, got {self.integral_cap}")
        check_finite("integral_state", self.integral_state)
        check_finite("prev_error", self.prev_error)


@dataclass(frozen=True)
class StanleyParams:
    gain: float = 2.5
    v_soft: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.gain) and self.gain > 0):
            raise ValueError(f"gain must be positive, got {self.gain}")
        if not (np.isfinite(self.v_soft) and self.v_soft > 0):
            raise ValueError(f"v_soft must be positive, got {self.v_soft}")


def pid_throttle(gains: PidGains, y_des: float, y: float) -> tuple[float, PidGains]:
    """One PID update on error e = y_des - y; returns (throttle, new gains).

    The integral accumulates e*dt under a hard anti-windup clamp; the
    derivative differences against prev_error. Output is clamped to
    [-1, 1]. The input gains object is left untouched.
    """
    check_finite("y_des", y_des)
    check_finite("y", y)
    e = y_des - y
    integral = min(gains.integral_cap, max(-gains.integral_cap, gains.integral_state + e * gains.dt))
    derivative = (e - gains.prev_error) / gains.dt
    out = gains.kp * e + gains.ki * integral + gains.kd * derivative
    throttle = min(1.0, max(-1.0, out))
    return throttle, replace(gains, integral_state=integral, prev_error=e)


def stanley_raw(theta_e: float, e_fa: float, v: float, params: StanleyParams) -> float:
    """The bare cross-track law: theta_e + atan(K * e_fa / (v + v_soft))."""
    return theta_e + math.atan(params.gain * e_fa / (v + params.v_soft))


def stanley_steer(
    state: BicycleState,
    path_heading: float,
    cross_track: float,
    params: StanleyParams,
    steer_max: float,
) -> float:
    """Normalized steer in [-1, 1] correcting toward the path.

    cross_track follows the e_fa > 0 = front-axle-left convention; the
    heading error enters negated so both terms steer toward the path
    (see the module docstring for why).
    """
    check_finite("path_heading", path_heading)
    check_finite("cross_track", cross_track)
    theta_e = wrap_angle(state.yaw - path_heading)
    raw = -theta_e + math.atan(params.gain * cross_track / (state.v + params.v_soft))
    return min(1.0, max(-1.0, raw / steer_max))


def cross_track_error(front_axle: np.ndarray, path_point: np.ndarray, path_dir: np.ndarray) -> float:
    """Signed offset of the front axle from the path; positive = left.

    path_dir need not be normalized; only its direction is used.
    """
    d = np.asarray(path_dir, dtype=float)
    norm = float(np.hypot(d[0], d[1]))
    if norm == 0.0:
        raise ValueError("path direction is zero-length")
    o = np.asarray(front_axle, dtype=float) - np.asarray(path_point, dtype=float)
    return float((o[0] * d[1] - o[1] * d[0]) / norm)


def track_trajectory(
    state: BicycleState,
    embedding: TrajectoryEmbedding,
    gains: PidGains,
    params: StanleyParams,
    vehicle: VehicleParams,
    lookahead_idx: int = DEFAULT_LOOKAHEAD_IDX,
    target_gap: float = DEFAULT_TARGET_GAP,
    max_age: float | None = None,
) -> tuple[ControlCommand, PidGains]:
    """Steer with Stanley toward the embedding polyline, throttle with PID.

    The PID tracks the forward distance to the lookahead sample against
    target_gap. max_age (seconds, measured between state.t and the
    embedding frame's timestamp) guards against stale plans; None skips
    the check.
    """
    if max_age is not None and state.t - embedding.frame.t > max_age:
        raise StaleEmbeddingError(
            f"embedding is {state.t - embedding.frame.t:.2f}s old, limit {max_age:.2f}s"
        )
    pts = embedding_world_points(embedding)
    idx = min(max(int(lookahead_idx), 0), embedding.k - 1)
    if embedding.k >= 2:
        if idx + 1 < embedding.k:
            seg = pts[idx + 1] - pts[idx]
        else:
            seg = pts[idx] - pts[idx - 1]
    else:
        seg = pts[0] - [embedding.frame.x, embedding.frame.y]
    path_heading = math.atan2(seg[1], seg[0])

    front_axle = np.array(
        [state.x + vehicle.l_f * math.cos(state.yaw), state.y + vehicle.l_f * math.sin(state.yaw)]
    )
    e_fa = cross_track_error(front_axle, pts[idx], seg)
    steer = stanley_steer(state, path_heading, e_fa, params, vehicle.steer_max)

    gap = float(world_to_vehicle(pts[idx : idx + 1], state)[0, 1])
    throttle, gains = pid_throttle(gains, gap, target_gap)
    return ControlCommand(steer=steer, throttle=throttle), gains
