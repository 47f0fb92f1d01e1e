"""Population training loop: spawn, roll out, keep the top m, mutate, repeat.

Fitness of one rollout is R = alpha * mean_speed + beta * distance; a
policy's generation fitness is its mean R over the configured training
tracks. Selection is deterministic (ties break toward the lower
population index) and elites pass to the next generation unmodified, so
with deterministic rollouts the best fitness can never decrease.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import _sim
from .policy import MlpPolicy, mutate, random_init
from .track import OccupancyGrid, TrackParams, generate_track, is_on_track, rasterize
from .validation import check_seed, mix64
from .vehicle import BicycleState, SensorConfig, VehicleParams, spawn_state

# Domain separators for seed derivation, so init-seeds and per-generation
# mutation seeds can never collide.
_SEED_INIT = 0
_SEED_GEN = 1


@dataclass(frozen=True)
class EvolutionConfig:
    """Training hyperparameters plus the environment they run in.

    The environment bundles (vehicle, sensor, track_params, hidden layer
    widths) ride along so a rollout is fully specified by (policy, grid,
    start, cfg) alone.
    """

    n_spawns: int = 100
    m_survivors: int = 20
    sigma: float = 0.1
    generations: int = 200
    max_steps: int = 2000
    dt: float = 0.05
    reward_alpha: float = 1.0
    reward_beta: float = 1.0
    master_seed: int = 0
    track_seeds: tuple[int, ...] = (0, 1, 2)
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    sensor: SensorConfig = field(default_factory=SensorConfig)
    track_params: TrackParams = field(default_factory=TrackParams)
    hidden_sizes: tuple[int, int] = (16, 16)
    n_jobs: int = 1

    def __post_init__(self):
        if not 0 < self.m_survivors < self.n_spawns:
            raise ValueError(
                f"need 0 < m_survivors < n_spawns, got {self.m_survivors}/{self.n_spawns}"
            )
        if not (np.isfinite(self.sigma) and self.sigma >= 0):
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if not 0 < self.dt <= 0.1:
            raise ValueError(f"dt must be in (0, 0.1], got {self.dt}")
        if not (np.isfinite(self.reward_alpha) and np.isfinite(self.reward_beta)):
            raise ValueError("reward coefficients must be finite")
        object.__setattr__(self, "master_seed", check_seed(self.master_seed))
        if len(self.track_seeds) < 1:
            raise ValueError("at least one track seed is required")
        object.__setattr__(
            self, "track_seeds", tuple(check_seed(s) for s in self.track_seeds)
        )
        h1, h2 = self.hidden_sizes
        if h1 < 1 or h2 < 1:
            raise ValueError(f"hidden sizes must be positive, got {self.hidden_sizes}")

    @property
    def layer_sizes(self) -> tuple[int, int, int, int]:
        h1, h2 = self.hidden_sizes
        return (self.sensor.n_v, h1, h2, 2)


@dataclass(frozen=True)
class RolloutResult:
    """Outcome of one policy episode on one grid."""

    fitness: float
    path: np.ndarray  # (steps_survived + 1, 2) positions
    steps_survived: int
    total_distance: float
    mean_speed: float
    terminated_off_track: bool


@dataclass(frozen=True)
class GenerationStats:
    generation: int
    best_fitness: float
    mean_survivor_fitness: float
    mean_population_fitness: float


def rollout(
    policy: MlpPolicy,
    grid: OccupancyGrid,
    start: BicycleState,
    cfg: EvolutionConfig,
) -> RolloutResult:
    """Run sense -> forward -> step until off-track or cfg.max_steps."""
    if not is_on_track(grid, (start.x, start.y)):
        raise ValueError(f"start pose ({start.x}, {start.y}) is off-track")
    if policy.n_inputs != cfg.sensor.n_v:
        raise ValueError(
            f"policy expects {policy.n_inputs} inputs, sensor provides {cfg.sensor.n_v}"
        )
    path_out = np.empty((cfg.max_steps + 1, 4))
    w0, w1, w2 = policy.weights
    b0, b1, b2 = policy.biases
    veh = cfg.vehicle
    steps, dist = _sim._rollout(
        grid.cells,
        w0,
        b0,
        w1,
        b1,
        w2,
        b2,
        float(start.x),
        float(start.y),
        float(start.yaw),
        float(start.v),
        cfg.sensor.beta_offset,
        cfg.sensor.range_cap,
        veh.l_f,
        veh.l_r,
        veh.a_max,
        veh.steer_max,
        veh.v_max,
        veh.drag,
        cfg.dt,
        cfg.max_steps,
        path_out,
    )
    mean_speed = dist / (steps * cfg.dt) if steps > 0 else 0.0
    fitness = cfg.reward_alpha * mean_speed + cfg.reward_beta * dist
    return RolloutResult(
        fitness=fitness,
        path=path_out[: steps + 1, :2].copy(),
        steps_survived=int(steps),
        total_distance=float(dist),
        mean_speed=float(mean_speed),
        terminated_off_track=steps < cfg.max_steps,
    )


def survivor_order(fitnesses) -> list[int]:
    """Population indices sorted by fitness descending, ties toward lower index."""
    return sorted(range(len(fitnesses)), key=lambda i: (-fitnesses[i], i))


def evolve_generation(
    population: list[tuple[MlpPolicy, float]],
    cfg: EvolutionConfig,
    gen_seed,
) -> list[MlpPolicy]:
    """Next generation: top-m elites first, then mutated offspring.

    Offspring j descends from survivor j % m with a mutation seed derived
    from (gen_seed, j), so the result depends only on the arguments and
    never on evaluation order.
    """
    if len(population) != cfg.n_spawns:
        raise ValueError(
            f"expected population of {cfg.n_spawns}, got {len(population)}"
        )
    gen_seed = check_seed(gen_seed)
    fitnesses = [fit for _, fit in population]
    order = survivor_order(fitnesses)
    survivors = [population[i][0] for i in order[: cfg.m_survivors]]
    offspring = [
        mutate(survivors[j % cfg.m_survivors], cfg.sigma, mix64(gen_seed, j))
        for j in range(cfg.n_spawns - cfg.m_survivors)
    ]
    return survivors + offspring


def _evaluate(
    policies: list[MlpPolicy],
    grids: list[OccupancyGrid],
    starts: list[BicycleState],
    cfg: EvolutionConfig,
) -> list[float]:
    """Mean fitness per policy over all training tracks, merged by index."""

    def one(policy: MlpPolicy) -> float:
        per_track = [
            rollout(policy, grid, start, cfg).fitness
            for grid, start in zip(grids, starts)
        ]
        return math.fsum(per_track) / len(per_track)

    if cfg.n_jobs != 1:
        from joblib import Parallel, delayed

        return list(
            Parallel(n_jobs=cfg.n_jobs, prefer="threads")(
                delayed(one)(p) for p in policies
            )
        )
    return [one(p) for p in policies]


def build_environment(
    cfg: EvolutionConfig,
) -> tuple[list[OccupancyGrid], list[BicycleState]]:
    """Grids and spawn states for every configured track seed."""
    grids = []
    starts = []
    for seed in cfg.track_seeds:
        spec = generate_track(seed, cfg.track_params)
        grids.append(rasterize(spec))
        starts.append(spawn_state(spec))
    return grids, starts


def train(cfg: EvolutionConfig) -> tuple[MlpPolicy, list[GenerationStats]]:
    """Full evolutionary run; returns the all-time best policy and stats.

    Elites re-evaluate to bit-identical fitness (rollouts are pure), so
    their scores are carried over instead of recomputed.
    """
    grids, starts = build_environment(cfg)
    population = [
        random_init(mix64(cfg.master_seed, _SEED_INIT, i), cfg.layer_sizes)
        for i in range(cfg.n_spawns)
    ]
    fitnesses = _evaluate(population, grids, starts, cfg)

    best_policy = None
    best_fitness = -math.inf
    stats: list[GenerationStats] = []
    m = cfg.m_survivors
    for gen in range(cfg.generations):
        order = survivor_order(fitnesses)
        survivor_fits = [fitnesses[i] for i in order[:m]]
        gen_best_idx = order[0]
        if fitnesses[gen_best_idx] > best_fitness:
            best_fitness = fitnesses[gen_best_idx]
            best_policy = population[gen_best_idx]
        stats.append(
            GenerationStats(
                generation=gen,
                best_fitness=fitnesses[gen_best_idx],
                mean_survivor_fitness=math.fsum(survivor_fits) / m,
                mean_population_fitness=math.fsum(fitnesses) / cfg.n_spawns,
            )
        )
        if gen == cfg.generations - 1:
            break
        population = evolve_generation(
            list(zip(population, fitnesses)), cfg, mix64(cfg.master_seed, _SEED_GEN, gen)
        )
        fitnesses = survivor_fits + _evaluate(population[m:], grids, starts, cfg)
    return best_policy, stats


def write_stats_csv(path, stats: list[GenerationStats]) -> None:
    """Stats as CSV with stable full-precision float formatting."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["generation", "best_fitness", "mean_survivor_fitness", "mean_population_fitness"]
        )
        for s in stats:
            writer.writerow(
                [
                    s.generation,
                    repr(s.best_fitness),
                    repr(s.mean_survivor_fitness),
                    repr(s.mean_population_fitness),
                ]
            )


def read_stats_csv(path) -> list[GenerationStats]:
    with open(path, "r", newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [
        GenerationStats(
            generation=int(r["generation"]),
            best_fitness=float(r["best_fitness"]),
            mean_survivor_fitness=float(r["mean_survivor_fitness"]),
            mean_population_fitness=float(r["mean_population_fitness"]),
        )
        for r in rows
    ]
