"""Scikit-learn style front door: fit evolves a policy, predict plans.

EvolutionaryPlanner wraps the training loop and the oracle planner in
the familiar estimator shape so it composes with sklearn tooling
(get_params/set_params, clone). fit takes track seeds as X; predict maps
(grid, pose) pairs to embedding rows.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .evolve import EvolutionConfig, train
from .track import OccupancyGrid, TrackParams
from .trajectory import TrajectoryEmbedding, oracle_generate
from .vehicle import BicycleState, SensorConfig, VehicleParams


class EvolutionaryPlanner(BaseEstimator):
    """Neuroevolution of a driving policy, exposed as a planner.

    Parameters mirror EvolutionConfig plus the embedding settings; None
    for the structured params means "use the library default".
    """

    def __init__(
        self,
        n_spawns: int = 100,
        m_survivors: int = 20,
        sigma: float = 0.1,
        generations: int = 200,
        max_steps: int = 2000,
        dt: float = 0.05,
        reward_alpha: float = 1.0,
        reward_beta: float = 1.0,
        master_seed: int = 0,
        hidden_sizes: tuple[int, int] = (16, 16),
        k: int = 10,
        y_step: float = 15.0,
        horizon_steps: int = 200,
        vehicle: VehicleParams | None = None,
        sensor: SensorConfig | None = None,
        track_params: TrackParams | None = None,
        n_jobs: int = 1,
    ):
        self.n_spawns = n_spawns
        self.m_survivors = m_survivors
        self.sigma = sigma
        self.generations = generations
        self.max_steps = max_steps
        self.dt = dt
        self.reward_alpha = reward_alpha
        self.reward_beta = reward_beta
        self.master_seed = master_seed
        self.hidden_sizes = hidden_sizes
        self.k = k
        self.y_step = y_step
        self.horizon_steps = horizon_steps
        self.vehicle = vehicle
        self.sensor = sensor
        self.track_params = track_params
        self.n_jobs = n_jobs

    def _config(self, track_seeds) -> EvolutionConfig:
        return EvolutionConfig(
            n_spawns=self.n_spawns,
            m_survivors=self.m_survivors,
            sigma=self.sigma,
            generations=self.generations,
            max_steps=self.max_steps,
            dt=self.dt,
            reward_alpha=self.reward_alpha,
            reward_beta=self.reward_beta,
            master_seed=self.master_seed,
            track_seeds=tuple(track_seeds),
            vehicle=self.vehicle or VehicleParams(),
            sensor=self.sensor or SensorConfig(),
            track_params=self.track_params or TrackParams(),
            hidden_sizes=tuple(self.hidden_sizes),
            n_jobs=self.n_jobs,
        )

    def fit(self, X=None, y=None):
        """Evolve on the given track seeds (default seeds 0, 1, 2).

        X is an iterable of unsigned seeds; y is ignored and present for
        estimator API compatibility.
        """
        seeds = (0, 1, 2) if X is None else tuple(int(s) for s in X)
        cfg = self._config(seeds)
        self.policy_, self.history_ = train(cfg)
        self.best_fitness_ = max(s.best_fitness for s in self.history_)
        self.track_seeds_ = seeds
        return self

    def plan(self, grid: OccupancyGrid, pose: BicycleState) -> TrajectoryEmbedding:
        """One embedding from the fitted policy at the given pose."""
        check_is_fitted(self, "policy_")
        return oracle_generate(
            self.policy_,
            grid,
            pose,
            k=self.k,
            y_step=self.y_step,
            horizon_steps=self.horizon_steps,
            dt=self.dt,
            vehicle=self.vehicle or VehicleParams(),
            sensor=self.sensor or SensorConfig(),
        )

    def predict(self, X) -> np.ndarray:
        """Embedding xs for each (grid, pose) pair in X, shape (len(X), k)."""
        check_is_fitted(self, "policy_")
        rows = [self.plan(grid, pose).xs for grid, pose in X]
        return np.array(rows).reshape(len(rows), self.k)
