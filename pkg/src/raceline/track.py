"""Procedural race-track generation and occupancy-grid rasterization.

A track is a closed loop of knots on a jittered ellipse, smoothed into a
C1 spline of cubic Bezier segments. Rasterization marks every cell whose
center lies within half the track width of the densely sampled
centerline, which yields a constant-width band and sidesteps the
self-intersection pathologies of offset curves.

Grid conventions: row-major cells, row 0 at the top, world y increasing
downward. Cell (r, c) owns the unit square centered on world point
(x=c, y=r).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import TrackGenerationError
from .validation import check_scalar, check_seed

#: Attempts before generation gives up on a seed.
MAX_RETRIES = 100

#: Geometric damping applied to the jitter amplitude on each retry.
RETRY_DAMP = 0.95

#: Centerline sample spacing in pixels (8 samples per pixel of arc length).
SAMPLE_SPACING = 0.125

#: Cyclic arc-length window (in track widths) treated as "adjacent" when
#: checking that the loop does not pinch against itself.
PINCH_EXCLUSION_WIDTHS = 2.0


@dataclass(frozen=True)
class TrackParams:
    """Generation parameters for one procedural track."""

    n_knots: int = 12
    grid_size: tuple[int, int] = (512, 512)
    width: float = 60.0
    jitter: float = 0.25

    def __post_init__(self):
        if self.n_knots < 4:
            raise ValueError(f"n_knots must be >= 4, got {self.n_knots}")
        rows, cols = self.grid_size
        if rows < 1 or cols < 1:
            raise ValueError(f"grid_size must be positive, got {self.grid_size}")
        check_scalar("width", self.width, low=4.0)
        check_scalar("jitter", self.jitter, low=0.0, high=0.9)


@dataclass(frozen=True)
class TrackSpec:
    """A generated track: closed centerline knots plus raster metadata."""

    centerline: np.ndarray  # (n_knots + 1, 2), first row == last row
    width: float
    grid_size: tuple[int, int]
    seed: int

    def __post_init__(self):
        cl = np.asarray(self.centerline, dtype=float)
        if cl.ndim != 2 or cl.shape[1] != 2 or cl.shape[0] < 5:
            raise ValueError("centerline must be a closed (n+1, 2) knot loop")
        if not np.all(np.isfinite(cl)):
            raise ValueError("centerline must be finite")
        if not np.array_equal(cl[0], cl[-1]):
            raise ValueError("centerline must close (first and last knots equal)")
        object.__setattr__(self, "centerline", cl)

    @property
    def knots(self) -> np.ndarray:
        """The unique knots, without the closing duplicate."""
        return self.centerline[:-1]

    def tobytes(self) -> bytes:
        """Canonical byte serialization, used for determinism checks."""
        rows, cols = self.grid_size
        head = np.array([self.seed, rows, cols], dtype="<u8").tobytes()
        return (
            head
            + np.float64(self.width).tobytes()
            + np.ascontiguousarray(self.centerline, dtype="<f8").tobytes()
        )


@dataclass
class OccupancyGrid:
    """Binarized top view: True cells are drivable lane, False is off-track."""

    cells: np.ndarray  # (rows, cols) bool
    px_per_meter: float = 10.0

    def __post_init__(self):
        cells = np.ascontiguousarray(self.cells, dtype=np.bool_)
        if cells.ndim != 2:
            raise ValueError("cells must be a 2-D array")
        if not cells.any():
            raise ValueError("grid must contain at least one drivable cell")
        cells.setflags(write=False)
        self.cells = cells

    @property
    def rows(self) -> int:
        return self.cells.shape[0]

    @property
    def cols(self) -> int:
        return self.cells.shape[1]


def _bezier_segments(knots: np.ndarray) -> np.ndarray:
    """Closed Catmull-Rom spline through ``knots`` as cubic Bezier segments.

    Returns shape (n, 4, 2); segment i runs from knot i to knot i+1 with
    C1 continuity across joints.
    """
    prev_k = np.roll(knots, 1, axis=0)
    next_k = np.roll(knots, -1, axis=0)
    next2 = np.roll(knots, -2, axis=0)
    b0 = knots
    b1 = knots + (next_k - prev_k) / 6.0
    b2 = next_k - (next2 - knots) / 6.0
    b3 = next_k
    return np.stack([b0, b1, b2, b3], axis=1)


def _eval_segments(segments: np.ndarray, per_seg: int) -> np.ndarray:
    """Uniform-parameter samples of every segment, concatenated in order."""
    t = np.linspace(0.0, 1.0, per_seg, endpoint=False)
    mt = 1.0 - t
    basis = np.stack([mt**3, 3 * mt**2 * t, 3 * mt * t**2, t**3], axis=1)
    pts = np.einsum("tb,sbc->stc", basis, segments)
    return pts.reshape(-1, 2)


def sample_centerline(spec: TrackSpec, spacing: float = SAMPLE_SPACING) -> np.ndarray:
    """Dense centerline samples at roughly ``spacing`` pixels apart.

    The sample count per segment overshoots (it is derived from the
    control-polygon length, an upper bound on arc length), so the true
    spacing is at or below the requested value.
    """
    segments = _bezier_segments(spec.knots)
    poly_len = np.linalg.norm(np.diff(segments, axis=1), axis=2).sum(axis=1)
    per_seg = int(max(8, np.ceil(poly_len.max() / spacing)))
    return _eval_segments(segments, per_seg)


def centerline_tangents(samples: np.ndarray) -> np.ndarray:
    """Unit tangents of a closed sample loop via central differences."""
    d = np.roll(samples, -1, axis=0) - np.roll(samples, 1, axis=0)
    norm = np.linalg.norm(d, axis=1, keepdims=True)
    norm[norm == 0.0] = 1.0
    return d / norm


def _min_turn_radius(samples: np.ndarray, stride: int) -> float:
    """Smallest circumradius over sample triplets ``stride`` apart."""
    a = samples
    b = np.roll(samples, -stride, axis=0)
    c = np.roll(samples, -2 * stride, axis=0)
    ab = np.linalg.norm(b - a, axis=1)
    bc = np.linalg.norm(c - b, axis=1)
    ca = np.linalg.norm(a - c, axis=1)
    cross = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (
        c[:, 0] - a[:, 0]
    )
    area2 = np.abs(cross)
    # Straight triplets have unbounded radius; avoid the 0/0.
    radii = np.where(area2 > 1e-12, ab * bc * ca / np.maximum(2.0 * area2, 1e-300), np.inf)
    return float(radii.min())


def min_clearance(samples: np.ndarray, exclusion_arc: float, spacing: float) -> float:
    """Smallest distance from any sample to a cyclically non-adjacent sample.

    Sample pairs closer than ``exclusion_arc`` along the loop are skipped;
    what remains measures how close the loop swings back past itself.
    """
    n = samples.shape[0]
    window = int(np.ceil(exclusion_arc / spacing))
    if 2 * window + 1 >= n:
        return np.inf
    tree = cKDTree(samples)
    # Query enough neighbors to look past the excluded arc window.
    best = np.inf
    dists, idx = tree.query(samples, k=min(n, 2 * window + 2))
    for i in range(n):
        sep = np.abs(idx[i] - i)
        sep = np.minimum(sep, n - sep)
        far = sep > window
        if far.any():
            best = min(best, float(dists[i][far].min()))
    return best


def _attempt_knots(
    rng: np.random.Generator, params: TrackParams, damp: float = 1.0
) -> np.ndarray:
    rows, cols = params.grid_size
    margin = params.width / 2.0 + 4.0
    rx = (cols / 2.0 - margin) / (1.0 + params.jitter)
    ry = (rows / 2.0 - margin) / (1.0 + params.jitter)
    if rx <= 0 or ry <= 0:
        raise TrackGenerationError(
            f"width {params.width} leaves no room in grid {params.grid_size}"
        )
    theta = 2.0 * np.pi * np.arange(params.n_knots) / params.n_knots
    raw = rng.uniform(-1.0, 1.0, size=params.n_knots)
    # One circular smoothing pass keeps adjacent radii correlated; uncorrelated
    # draws kink the spline tighter than the width on most attempts.
    smooth = (np.roll(raw, 1) + 2.0 * raw + np.roll(raw, -1)) / 4.0
    scale = 1.0 + params.jitter * damp * smooth
    cx, cy = cols / 2.0, rows / 2.0
    return np.stack(
        [cx + rx * scale * np.cos(theta), cy + ry * scale * np.sin(theta)], axis=1
    )


def generate_track(seed, params: TrackParams | None = None) -> TrackSpec:
    """Deterministically generate a feasible closed track for ``seed``.

    Knots sit on a radially jittered ellipse inscribed in the grid. A
    candidate is rejected when the smoothed loop turns tighter than the
    track width or pinches back within one width of itself; up to
    MAX_RETRIES re-jitters are attempted with geometrically damped
    amplitude, so generation succeeds for every seed whenever the plain
    ellipse itself fits the grid.
    """
    seed = check_seed(seed)
    params = params or TrackParams()
    rng = np.random.default_rng(seed)
    rows, cols = params.grid_size

    for attempt in range(MAX_RETRIES):
        knots = _attempt_knots(rng, params, damp=RETRY_DAMP**attempt)
        spec = TrackSpec(
            centerline=np.vstack([knots, knots[:1]]),
            width=float(params.width),
            grid_size=(int(rows), int(cols)),
            seed=seed,
        )
        coarse = sample_centerline(spec, spacing=1.0)
        half = params.width / 2.0
        inside = (
            (coarse[:, 0] >= half)
            & (coarse[:, 0] <= cols - 1 - half)
            & (coarse[:, 1] >= half)
            & (coarse[:, 1] <= rows - 1 - half)
        )
        if not inside.all():
            continue
        if _min_turn_radius(coarse, stride=4) < params.width:
            continue
        if (
            min_clearance(
                coarse,
                exclusion_arc=PINCH_EXCLUSION_WIDTHS * params.width,
                spacing=1.0,
            )
            < params.width
        ):
            continue
        return spec

    raise TrackGenerationError(
        f"no feasible track for seed {seed} after {MAX_RETRIES} attempts "
        f"(params {params})"
    )


def rasterize_band(
    samples: np.ndarray, width: float, grid_size: tuple[int, int]
) -> np.ndarray:
    """Boolean mask of cells whose centers lie within width/2 of ``samples``."""
    rows, cols = grid_size
    tree = cKDTree(samples)
    xs, ys = np.meshgrid(np.arange(cols, dtype=float), np.arange(rows, dtype=float))
    centers = np.stack([xs.ravel(), ys.ravel()], axis=1)
    dist, _ = tree.query(centers, k=1)
    return (dist <= width / 2.0).reshape(rows, cols)


def rasterize(spec: TrackSpec, px_per_meter: float = 10.0) -> OccupancyGrid:
    """Rasterize a track spec into its binarized occupancy grid."""
    samples = sample_centerline(spec)
    cells = rasterize_band(samples, spec.width, spec.grid_size)
    return OccupancyGrid(cells=cells, px_per_meter=px_per_meter)


def grid_index(x: float, y: float) -> tuple[int, int]:
    """(row, col) of the cell owning world point (x, y). Half-up rounding."""
    return int(np.floor(y + 0.5)), int(np.floor(x + 0.5))


def is_on_track(grid: OccupancyGrid, p) -> bool:
    """True iff ``p`` rounds to an in-bounds drivable cell."""
    x, y = float(p[0]), float(p[1])
    if not (np.isfinite(x) and np.isfinite(y)):
        return False
    r, c = grid_index(x, y)
    if r < 0 or r >= grid.rows or c < 0 or c >= grid.cols:
        return False
    return bool(grid.cells[r, c])


def points_on_track(grid: OccupancyGrid, points: np.ndarray) -> np.ndarray:
    """Vectorized is_on_track over an (n, 2) array."""
    pts = np.asarray(points, dtype=float)
    r = np.floor(pts[:, 1] + 0.5).astype(np.int64)
    c = np.floor(pts[:, 0] + 0.5).astype(np.int64)
    ok = (r >= 0) & (r < grid.rows) & (c >= 0) & (c < grid.cols)
    out = np.zeros(pts.shape[0], dtype=bool)
    out[ok] = grid.cells[r[ok], c[ok]]
    return out


# ---------------------------------------------------------------------------
# PGM I/O


def write_pgm(path, cells: np.ndarray) -> None:
    """Write a binary P5 PGM: 255 = drivable, 0 = off-track."""
    cells = np.asarray(cells, dtype=bool)
    rows, cols = cells.shape
    header = f"P5\n{cols} {rows}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write((cells.astype(np.uint8) * 255).tobytes())


def read_pgm(path) -> np.ndarray:
    """Read a binary P5 PGM written by :func:`write_pgm` (boolean cells)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    fields: list[int] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace byte after maxval
    cols, rows, maxval = fields
    if maxval != 255:
        raise ValueError(f"{path}: expected maxval 255, got {maxval}")
    raster = np.frombuffer(data, dtype=np.uint8, count=rows * cols, offset=pos)
    return (raster > 127).reshape(rows, cols)


def _meta_path(pgm_path) -> str:
    s = str(pgm_path)
    return (s[: -len(".pgm")] if s.endswith(".pgm") else s) + ".meta"


def save_track(path, grid: OccupancyGrid, spec: TrackSpec) -> None:
    """Write the grid as PGM plus a key=value sidecar (seed, width, px_per_meter)."""
    write_pgm(path, grid.cells)
    with open(_meta_path(path), "w", encoding="ascii") as fh:
        fh.write(f"seed={spec.seed}\n")
        fh.write(f"width={spec.width!r}\n")
        fh.write(f"px_per_meter={grid.px_per_meter!r}\n")


def load_track(path) -> tuple[OccupancyGrid, dict]:
    """Read a PGM grid and its sidecar metadata (if present)."""
    cells = read_pgm(path)
    meta: dict = {}
    try:
        with open(_meta_path(path), "r", encoding="ascii") as fh:
            for line in fh:
                line = line.strip()
                if not line or "=" not in line:
                    continue
                key, value = line.split("=", 1)
                meta[key] = value
    except FileNotFoundError:
        pass
    px_per_meter = float(meta.get("px_per_meter", 10.0))
    return OccupancyGrid(cells=cells, px_per_meter=px_per_meter), meta
