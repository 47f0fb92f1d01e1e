"""Shared fixtures and the acceptance-criteria summary hook.

Track construction and policy training dominate the suite's wall time,
so both are session-scoped; everything else is cheap enough to build
per test.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pytest

from raceline.evolve import EvolutionConfig, train
from raceline.track import (
    OccupancyGrid,
    TrackSpec,
    centerline_tangents,
    generate_track,
    rasterize,
    sample_centerline,
)
from raceline.vehicle import BicycleState, spawn_state


@dataclass(frozen=True)
class TrackBundle:
    """One generated track with everything the tests keep re-deriving."""

    spec: TrackSpec
    grid: OccupancyGrid
    start: BicycleState
    samples: np.ndarray
    tangents: np.ndarray


def make_bundle(seed, params=None) -> TrackBundle:
    spec = generate_track(seed, params)
    samples = sample_centerline(spec, spacing=1.0)
    return TrackBundle(
        spec=spec,
        grid=rasterize(spec),
        start=spawn_state(spec),
        samples=samples,
        tangents=centerline_tangents(samples),
    )


@pytest.fixture(scope="session")
def track0() -> TrackBundle:
    return make_bundle(0)


#: Cheap training run used by module tests that need a driver that can
#: actually lap; not benchmark-grade, converges in a few seconds.
QUICK_CFG = EvolutionConfig(
    n_spawns=40, m_survivors=8, generations=30, track_seeds=(0,)
)


@pytest.fixture(scope="session")
def quick_policy():
    best, _ = train(QUICK_CFG)
    return best


# ---------------------------------------------------------------------------
# Acceptance summary: one pass/fail line per criterion after the run.

ACCEPTANCE_CRITERIA = {
    "test_closed_loop_benchmark_on_held_out_tracks": (
        "closed-loop 5-lap benchmark: zero failures on >= 4/5 held-out tracks"
    ),
    "test_best_fitness_never_decreases": (
        "elitism: best fitness non-decreasing over 5 seeds x 50 generations (exact)"
    ),
    "test_survivor_fitness_learning_signal": (
        "learning: survivor fitness at gen 50 >= 3x gen 1 on >= 4/5 seeds"
    ),
    "test_sensor_matches_marching_oracle": (
        "sensing: ray distances within 1 px of 0.05 px marching oracle, 1000 poses x 7 rays"
    ),
    "test_range_cap_is_exact": (
        "sensing: outputs never exceed 150 px and hit the cap exactly when the oracle does"
    ),
    "test_bicycle_circle_and_speed_closed_forms": (
        "dynamics: constant-steer circle within 1%; drag-free speed within 0.1%"
    ),
    "test_bezier_suite": (
        "bezier: dual-route eval 1e-9; collinear fit 1e-8; resample vs dense scan 1e-3"
    ),
    "test_stanley_converges_from_offset": (
        "stanley: |cross-track| < 1 px within 5 s from a 20 px offset at 30 px/s"
    ),
    "test_pid_clamping_and_anti_windup": (
        "pid: throttle in [-1, 1] and integral within cap over 10^4 adversarial steps"
    ),
    "test_train_and_benchmark_are_byte_deterministic": (
        "determinism: reruns produce byte-identical policy.bin, stats.csv, report CSV"
    ),
    "test_planner_rate_floor": (
        "planner rate: full replanning pipeline >= 260 plans/s median"
    ),
    "test_exported_dataset_containment": (
        "dataset: every exported embedding passes the drivable-region containment oracle"
    ),
}

_acceptance_outcomes: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.rsplit("::", 1)[-1]
    if name not in ACCEPTANCE_CRITERIA:
        return
    if report.failed:
        _acceptance_outcomes[name] = "FAIL"
    elif report.skipped:
        _acceptance_outcomes.setdefault(name, "SKIP")
    elif report.when == "call" and report.passed:
        _acceptance_outcomes.setdefault(name, "PASS")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for name, label in ACCEPTANCE_CRITERIA.items():
        outcome = _acceptance_outcomes.get(name)
        if outcome is None:
            continue
        terminalreporter.write_line(f"[{outcome}] {label}")
