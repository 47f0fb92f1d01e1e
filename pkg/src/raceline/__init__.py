"""Racing-line synthesis toolkit: procedural occupancy-grid tracks, a
neuroevolved driving policy over a kinematic bicycle model, Bezier
trajectory embeddings, PID + Stanley tracking, and a lap benchmark.
"""

from .config import RunConfig, load_config, parse_config
from .control import PidGains, StanleyParams, pid_throttle, stanley_raw, stanley_steer, track_trajectory
from .errors import (
    ExportError,
    FitError,
    HorizonError,
    StaleEmbeddingError,
    TrackGenerationError,
)
from .estimator import EvolutionaryPlanner
from .evolve import (
    EvolutionConfig,
    GenerationStats,
    RolloutResult,
    evolve_generation,
    rollout,
    train,
)
from .geometry import bezier_eval, bezier_fit, resample_at_y
from .harness import (
    BenchmarkReport,
    TrackResult,
    measure_planner_rate,
    render_replay,
    run_benchmark,
    run_closed_loop,
)
from .policy import MlpPolicy, forward, load_policy, mutate, random_init, save_policy
from .track import (
    OccupancyGrid,
    TrackParams,
    TrackSpec,
    generate_track,
    is_on_track,
    load_track,
    rasterize,
    save_track,
)
from .trajectory import (
    TrajectoryEmbedding,
    export_dataset,
    oracle_generate,
    path_to_embedding,
)
from .vehicle import (
    BicycleState,
    ControlCommand,
    SensorConfig,
    VehicleParams,
    sense,
    spawn_state,
    step,
)

__version__ = "0.1.0"

__all__ = [
    "BenchmarkReport",
    "BicycleState",
    "ControlCommand",
    "EvolutionConfig",
    "EvolutionaryPlanner",
    "ExportError",
    "FitError",
    "GenerationStats",
    "HorizonError",
    "MlpPolicy",
    "OccupancyGrid",
    "PidGains",
    "RolloutResult",
    "RunConfig",
    "SensorConfig",
    "StaleEmbeddingError",
    "StanleyParams",
    "TrackGenerationError",
    "TrackParams",
    "TrackResult",
    "TrackSpec",
    "TrajectoryEmbedding",
    "VehicleParams",
    "bezier_eval",
    "bezier_fit",
    "evolve_generation",
    "export_dataset",
    "forward",
    "generate_track",
    "is_on_track",
    "load_config",
    "load_policy",
    "load_track",
    "measure_planner_rate",
    "mutate",
    "oracle_generate",
    "parse_config",
    "path_to_embedding",
    "pid_throttle",
    "random_init",
    "rasterize",
    "render_replay",
    "resample_at_y",
    "rollout",
    "run_benchmark",
    "run_closed_loop",
    "save_policy",
    "save_track",
    "sense",
    "spawn_state",
    "stanley_raw",
    "stanley_steer",
    "step",
    "track_trajectory",
    "train",
]
