"""Flat key=value run configuration covering every module's parameters.

One RunConfig drives track generation, training, planning, and the
benchmark harness, so a single file reproduces a whole experiment. Keys
are the bare field names below; values parse by the type of the default
(track_seeds is comma-separated, grid_size is one side length of a
square grid).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

from .control import PidGains, StanleyParams
from .evolve import EvolutionConfig
from .track import TrackParams
from .validation import check_seed
from .vehicle import SensorConfig, VehicleParams


@dataclass(frozen=True)
class RunConfig:
    # track
    n_knots: int = 12
    grid_size: int = 512
    width: float = 60.0
    jitter: float = 0.25
    # vehicle
    l_f: float = 1.3
    l_r: float = 1.3
    mass: float = 1.5
    a_max: float = 40.0
    steer_max: float = 0.45
    drag: float = 0.3
    v_max: float = 80.0
    # sensors
    n_v: int = 7
    beta_offset: float = math.pi / 6
    range_cap: float = 150.0
    # evolution
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
    hidden_sizes: tuple[int, ...] = (16, 16)
    n_jobs: int = 1
    # embedding
    k: int = 10
    y_step: float = 15.0
    horizon_steps: int = 200
    # controller
    kp: float = 1.0
    ki: float = 0.0
    kd: float = 0.1
    stanley_gain: float = 2.5
    v_soft: float = 1.0
    lookahead_idx: int = 2
    target_gap: float = 30.0
    # harness
    replan_interval: int = 10
    laps_target: int = 5
    step_cap: int = 60000

    def __post_init__(self):
        if self.replan_interval < 1:
            raise ValueError("replan_interval must be >= 1")
        if self.laps_target < 1:
            raise ValueError("laps_target must be >= 1")
        if self.step_cap < 1:
            raise ValueError("step_cap must be >= 1")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.horizon_steps < 1:
            raise ValueError("horizon_steps must be >= 1")
        object.__setattr__(self, "master_seed", check_seed(self.master_seed))
        # Delegate the remaining range checks to the component constructors.
        self.track_params()
        self.vehicle_params()
        self.sensor_config()
        self.pid_gains()
        self.stanley_params()

    def track_params(self) -> TrackParams:
        return TrackParams(
            n_knots=self.n_knots,
            grid_size=(self.grid_size, self.grid_size),
            width=self.width,
            jitter=self.jitter,
        )

    def vehicle_params(self) -> VehicleParams:
        return VehicleParams(
            l_f=self.l_f,
            l_r=self.l_r,
            mass=self.mass,
            a_max=self.a_max,
            steer_max=self.steer_max,
            drag=self.drag,
            v_max=self.v_max,
        )

    def sensor_config(self) -> SensorConfig:
        return SensorConfig(
            n_v=self.n_v, beta_offset=self.beta_offset, range_cap=self.range_cap
        )

    def evolution_config(self) -> EvolutionConfig:
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
            track_seeds=self.track_seeds,
            vehicle=self.vehicle_params(),
            sensor=self.sensor_config(),
            track_params=self.track_params(),
            hidden_sizes=tuple(self.hidden_sizes),
            n_jobs=self.n_jobs,
        )

    def pid_gains(self) -> PidGains:
        return PidGains(kp=self.kp, ki=self.ki, kd=self.kd, dt=self.dt)

    def stanley_params(self) -> StanleyParams:
        return StanleyParams(gain=self.stanley_gain, v_soft=self.v_soft)

    def with_overrides(self, **kwargs) -> "RunConfig":
        return replace(self, **kwargs)


def _parse_value(key: str, raw: str, default):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            if raw.lower() in ("1", "true", "yes"):
                return True
            if raw.lower() in ("0", "false", "no"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            if not raw:
                return ()
            return tuple(int(part) for part in raw.split(","))
    except ValueError:
        raise ValueError(f"config key {key}: cannot parse {raw!r}") from None
    raise ValueError(f"config key {key}: unsupported type")


def parse_config(text: str) -> RunConfig:
    """Parse key=value lines; # starts a comment, blank lines are skipped."""
    defaults = RunConfig()
    known = {f.name: getattr(defaults, f.name) for f in fields(RunConfig)}
    overrides = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key=value, got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        overrides[key] = _parse_value(key, raw, known[key])
    return RunConfig(**overrides)


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def dump_config(cfg: RunConfig) -> str:
    """The config as key=value lines that parse back to an equal config."""
    lines = []
    for f in fields(RunConfig):
        value = getattr(cfg, f.name)
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{f.name}={value}")
    return "\n".join(lines) + "\n"
