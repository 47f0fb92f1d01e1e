"""Bezier curve evaluation, least-squares fitting, and regular-y resampling.

Curves are stored as plain float64 arrays of control points with shape
(degree + 1, 2). Evaluation uses De Casteljau; fitting solves a linear
least-squares problem over the Bernstein basis with chord-length
parameters; resampling inverts y(t) by bisection, which is exact under
the documented monotonicity precondition.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import FitError
from .validation import as_points

#: Default degree used when fitting driven paths.
DEFAULT_FIT_DEGREE = 3

#: y(t*) is solved to within this many pixels when resampling.
RESAMPLE_TOL = 1e-6

#: Number of parameter samples used for the numerical monotonicity check.
MONOTONE_CHECK_SAMPLES = 256


def check_control_points(control_points, name: str = "control_points") -> np.ndarray:
    """Validate control points: shape (n, 2) with n >= 2, all finite."""
    return as_points(control_points, min_points=2, name=name)


def bezier_eval(control_points, t):
    """Evaluate a Bezier curve at parameter ``t`` by De Casteljau.

    ``t`` may be a scalar in [0, 1] or an array of such; returns a (2,)
    point for scalar input, else an (m, 2) array.
    """
    cp = check_control_points(control_points)
    ts = np.asarray(t, dtype=float)
    scalar = ts.ndim == 0
    ts = np.atleast_1d(ts)
    if ts.size and (ts.min() < 0.0 or ts.max() > 1.0):
        raise ValueError(f"t must lie in [0, 1], got range [{ts.min()}, {ts.max()}]")

    # One triangular pass, vectorized over all parameters at once.
    n = cp.shape[0]
    work = np.broadcast_to(cp[:, None, :], (n, ts.size, 2)).copy()
    w = ts[None, :, None]
    for level in range(n - 1, 0, -1):
        work[:level] = (1.0 - w) * work[:level] + w * work[1 : level + 1]
    out = work[0]
    return out[0] if scalar else out


def bernstein_matrix(t, degree: int) -> np.ndarray:
    """Bernstein basis design matrix of shape (len(t), degree + 1)."""
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    d = int(degree)
    if d < 1:
        raise ValueError(f"degree must be >= 1, got {degree}")
    cols = [
        math.comb(d, j) * ts**j * (1.0 - ts) ** (d - j)
        for j in range(d + 1)
    ]
    return np.stack(cols, axis=1)


def chord_parameters(points) -> np.ndarray:
    """Chord-length parameters in [0, 1] with endpoints pinned to 0 and 1."""
    pts = as_points(points, min_points=2)
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    if np.any(seg == 0.0):
        raise ValueError("consecutive points must be distinct (zero chord length)")
    cum = np.concatenate(([0.0], np.cumsum(seg)))
    return cum / cum[-1]


def bezier_fit(points, degree: int = DEFAULT_FIT_DEGREE) -> np.ndarray:
    """Least-squares Bezier fit with chord-length parameterization.

    Returns the (degree + 1, 2) control-point array minimizing the sum of
    squared residuals at the chord-length parameters of ``points``.
    """
    d = int(degree)
    if d < 1:
        raise ValueError(f"degree must be >= 1, got {degree}")
    pts = as_points(points, min_points=d + 1)
    t = chord_parameters(pts)
    basis = bernstein_matrix(t, d)
    control, _, rank, _ = np.linalg.lstsq(basis, pts, rcond=None)
    if rank < d + 1:
        raise FitError(
            f"rank-deficient fit: basis rank {rank} < {d + 1} "
            "(repeated or degenerate parameters)"
        )
    return control


def is_monotone_in_y(control_points, samples: int = MONOTONE_CHECK_SAMPLES) -> bool:
    """Numerical check that y(t) is non-decreasing with positive total span."""
    cp = check_control_points(control_points)
    ys = bezier_eval(cp, np.linspace(0.0, 1.0, samples))[:, 1]
    return bool(np.all(np.diff(ys) >= -1e-9) and ys[-1] > ys[0])


def resample_at_y(control_points, y_values) -> np.ndarray:
    """x-coordinates of the curve at the requested y values.

    The curve must be monotonically increasing in y along t (checked at
    MONOTONE_CHECK_SAMPLES parameters) and every requested y must lie in
    [y(0), y(1)]. Each y is inverted by bisection to RESAMPLE_TOL pixels.
    """
    cp = check_control_points(control_points)
    ys = np.atleast_1d(np.asarray(y_values, dtype=float))
    if not np.all(np.isfinite(ys)):
        raise ValueError("y_values must be finite")
    if not is_monotone_in_y(cp):
        raise ValueError(
            "curve is not monotonically increasing in y; clip the path first"
        )
    y0 = bezier_eval(cp, 0.0)[1]
    y1 = bezier_eval(cp, 1.0)[1]
    if ys.size and (ys.min() < y0 - RESAMPLE_TOL or ys.max() > y1 + RESAMPLE_TOL):
        raise ValueError(
            f"requested y outside curve range [{y0}, {y1}]: "
            f"[{ys.min()}, {ys.max()}]"
        )

    lo = np.zeros_like(ys)
    hi = np.ones_like(ys)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        ymid = bezier_eval(cp, mid)[:, 1]
        err = ymid - ys
        if np.max(np.abs(err)) <= RESAMPLE_TOL:
            lo = hi = mid
            break
        below = ymid < ys
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    t_star = 0.5 * (lo + hi)
    return bezier_eval(cp, t_star)[:, 0]
