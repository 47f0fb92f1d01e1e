"""Compiled hot-path kernels: ray casting, bicycle stepping, MLP forward, rollout.

Everything here is a plain-scalar/ndarray function so numba can compile it
once and the public wrappers in vehicle/policy/evolve stay thin. The
wrappers call these same kernels; there is deliberately no second
pure-Python implementation to drift out of sync.

Grid convention matches the track module: cell (r, c) owns the unit
square centered on (x=c, y=r), i.e. boundaries sit at half-integers in
world coordinates.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _wrap_angle(a):
    """Wrap to (-pi, pi]."""
    return math.pi - ((math.pi - a) % (2.0 * math.pi))


@njit(cache=True, nogil=True)
def _on_cells(cells, x, y):
    r = int(math.floor(y + 0.5))
    c = int(math.floor(x + 0.5))
    if r < 0 or r >= cells.shape[0] or c < 0 or c >= cells.shape[1]:
        return False
    return cells[r, c]


# Range resolution in px: readings are the first ray sample, taken every
# SENSE_STEP, whose cell is off-track. Off-track slivers the sampling comb
# cannot land in (corner grazes thinner than one step) are invisible.
SENSE_STEP = 0.05


@njit(cache=True, nogil=True)
def _ray_distance(cells, x, y, angle, max_range):
    """Distance along (cos a, sin a) to the first off-track ray sample.

    Grid traversal crosses one cell boundary per iteration; an off-track
    cell terminates the ray at the first multiple of SENSE_STEP inside it.
    Returns max_range when no sample within range is off-track, 0 when the
    origin itself is off-track.
    """
    # Shift so cell (r, c) spans [c, c+1) x [r, r+1).
    u = x + 0.5
    w = y + 0.5
    c = int(math.floor(u))
    r = int(math.floor(w))
    rows, cols = cells.shape
    if r < 0 or r >= rows or c < 0 or c >= cols or not cells[r, c]:
        return 0.0
    dx = math.cos(angle)
    dy = math.sin(angle)

    if dx > 0.0:
        step_c = 1
        t_max_x = (c + 1.0 - u) / dx
        t_dx = 1.0 / dx
    elif dx < 0.0:
        step_c = -1
        t_max_x = (c - u) / dx
        t_dx = -1.0 / dx
    else:
        step_c = 0
        t_max_x = math.inf
        t_dx = math.inf
    if dy > 0.0:
        step_r = 1
        t_max_y = (r + 1.0 - w) / dy
        t_dy = 1.0 / dy
    elif dy < 0.0:
        step_r = -1
        t_max_y = (r - w) / dy
        t_dy = -1.0 / dy
    else:
        step_r = 0
        t_max_y = math.inf
        t_dy = math.inf

    while True:
        if t_max_x < t_max_y:
            t_in = t_max_x
            if t_in >= max_range:
                return max_range
            c += step_c
            t_max_x += t_dx
        else:
            t_in = t_max_y
            if t_in >= max_range:
                return max_range
            r += step_r
            t_max_y += t_dy
        out_of_bounds = r < 0 or r >= rows or c < 0 or c >= cols
        if out_of_bounds or not cells[r, c]:
            k = int(math.ceil(t_in / SENSE_STEP))
            if k < 1:
                k = 1
            t_sample = k * SENSE_STEP
            if t_sample >= max_range:
                return max_range
            # Once outside the grid the ray never re-enters it.
            if out_of_bounds or t_sample < min(t_max_x, t_max_y):
                return t_sample


@njit(cache=True, nogil=True)
def _sense_into(cells, x, y, yaw, beta, range_cap, out):
    """Fill out[i] with the capped ray distance for each of len(out) rays.

    Rays fan symmetrically around the heading at ``beta`` spacing. Returns
    False (and zeros) when the origin is off-track.
    """
    n = out.shape[0]
    if not _on_cells(cells, x, y):
        for i in range(n):
            out[i] = 0.0
        return False
    half = (n - 1) / 2.0
    for i in range(n):
        angle = yaw + (i - half) * beta
        out[i] = _ray_distance(cells, x, y, angle, range_cap)
    return True


@njit(cache=True, nogil=True)
def _step(x, y, yaw, v, steer_cmd, throttle_cmd, lf, lr, a_max, steer_max, v_max, drag, dt):
    """One explicit-Euler bicycle update; commands are normalized [-1, 1]."""
    steer = min(1.0, max(-1.0, steer_cmd))
    throttle = min(1.0, max(-1.0, throttle_cmd))
    delta = steer * steer_max
    accel = throttle * a_max
    beta_slip = math.atan(lr * math.tan(delta) / (lf + lr))
    x2 = x + v * math.cos(yaw + beta_slip) * dt
    y2 = y + v * math.sin(yaw + beta_slip) * dt
    yaw2 = _wrap_angle(yaw + (v * math.sin(beta_slip) / lr) * dt)
    v2 = min(v_max, max(0.0, v + (accel - drag * v) * dt))
    return x2, y2, yaw2, v2


@njit(cache=True, nogil=True)
def _forward_into(w0, b0, w1, b1, w2, b2, x_in, h0, h1, out):
    """Three dense layers, tanh throughout; writes the 2-vector ``out``."""
    for j in range(w0.shape[0]):
        s = b0[j]
        for i in range(w0.shape[1]):
            s += w0[j, i] * x_in[i]
        h0[j] = math.tanh(s)
    for j in range(w1.shape[0]):
        s = b1[j]
        for i in range(w1.shape[1]):
            s += w1[j, i] * h0[i]
        h1[j] = math.tanh(s)
    for j in range(w2.shape[0]):
        s = b2[j]
        for i in range(w2.shape[1]):
            s += w2[j, i] * h1[i]
        out[j] = math.tanh(s)


@njit(cache=True, nogil=True)
def _rollout(
    cells,
    w0,
    b0,
    w1,
    b1,
    w2,
    b2,
    x,
    y,
    yaw,
    v,
    beta,
    range_cap,
    lf,
    lr,
    a_max,
    steer_max,
    v_max,
    drag,
    dt,
    max_steps,
    path_out,
):
    """Sense -> forward -> step loop until off-track or max_steps.

    path_out must be (max_steps + 1, 4); row i holds (x, y, yaw, v) after
    i steps. Returns (steps_survived, total_distance). The final row may
    be off-track when that is what ended the episode.
    """
    n_v = w0.shape[1]
    obs = np.empty(n_v, dtype=np.float64)
    x_in = np.empty(n_v, dtype=np.float64)
    h0 = np.empty(w0.shape[0], dtype=np.float64)
    h1 = np.empty(w1.shape[0], dtype=np.float64)
    act = np.empty(2, dtype=np.float64)

    path_out[0, 0] = x
    path_out[0, 1] = y
    path_out[0, 2] = yaw
    path_out[0, 3] = v
    steps = 0
    dist = 0.0
    for _ in range(max_steps):
        if not _sense_into(cells, x, y, yaw, beta, range_cap, obs):
            break
        for i in range(n_v):
            x_in[i] = obs[i] / range_cap
        _forward_into(w0, b0, w1, b1, w2, b2, x_in, h0, h1, act)
        nx, ny, nyaw, nv = _step(
            x, y, yaw, v, act[0], act[1], lf, lr, a_max, steer_max, v_max, drag, dt
        )
        dist += math.hypot(nx - x, ny - y)
        x = nx
        y = ny
        yaw = nyaw
        v = nv
        steps += 1
        path_out[steps, 0] = x
        path_out[steps, 1] = y
        path_out[steps, 2] = yaw
        path_out[steps, 3] = v
    return steps, dist
