"""Input validation helpers used across the package.

Small and strict on purpose: every public entry point funnels its array
and scalar arguments through these so error messages stay uniform.
"""
from __future__ import annotations

import numpy as np

_U64_MAX = 2**64


def check_finite(name: str, value) -> None:
    """Raise ValueError if ``value`` (scalar or array) contains NaN/Inf."""
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite, got {value!r}")


def check_scalar(name: str, value, low=None, high=None) -> float:
    """Validate a finite scalar, optionally within [low, high]. Returns it as float."""
    v = float(value)
    if not np.isfinite(v):
        raise ValueError(f"{name} must be finite, got {value!r}")
    if low is not None and v < low:
        raise ValueError(f"{name} must be >= {low}, got {v}")
    if high is not None and v > high:
        raise ValueError(f"{name} must be <= {high}, got {v}")
    return v


def check_seed(seed) -> int:
    """Validate an unsigned 64-bit seed and return it as int."""
    s = int(seed)
    if not 0 <= s < _U64_MAX:
        raise ValueError(f"seed must be in [0, 2**64), got {seed!r}")
    return s


def as_points(points, min_points: int = 1, name: str = "points") -> np.ndarray:
    """Coerce to a finite float64 array of shape (n, 2) with n >= min_points."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1 and arr.size == 2:
        arr = arr.reshape(1, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"{name} must have shape (n, 2), got {arr.shape}")
    if arr.shape[0] < min_points:
        raise ValueError(f"{name} needs at least {min_points} points, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def mix64(*parts: int) -> int:
    """Deterministic splitmix64 hash of integer parts, for deriving sub-seeds.

    Independent of execution order and platform; used wherever one master
    seed must fan out into many uncorrelated stream seeds.
    """
    z = 0
    for p in parts:
        z = (z + (int(p) & (_U64_MAX - 1)) + 0x9E3779B97F4A7C15) % _U64_MAX
        z ^= z >> 30
        z = (z * 0xBF58476D1CE4E5B9) % _U64_MAX
        z ^= z >> 27
        z = (z * 0x94D049BB133111EB) % _U64_MAX
        z ^= z >> 31
    return z
