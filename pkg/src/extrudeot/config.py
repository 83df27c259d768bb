"""Flat ``section.key=value`` run configuration.

Example::

    # lines starting with '#' are comments
    scenario.vehicle=compact_car
    scenario.trajectory=straight:60,6;arc:25,1.5708,6;straight:60,6
    scenario.sensors=road
    tracker.n_control_points=10
    run.seed=3

Sections are ``scenario``, ``tracker``, ``process``, ``init``, ``metrics``
and ``run``; every key has a default, so an empty file is a valid config.
``process.*`` keys left at ``none`` use the default noise levels scaled to
the frame interval.
"""

from __future__ import annotations

import math
import typing
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .dynamics import ProcessNoiseConfig
from .filter import InitConfig, MeasurementNoiseConfig, TrackerConfig
from .scenario import (
    INIT_RADIUS, PRESETS, Arc, Hold, SensorSpec, Stop, Straight, TrajectorySpec,
    VehiclePreset, ring_sensors, road_sensors, static, straight_left_turn,
)
from .shape import Pose


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioSection:
    vehicle: str = "compact_car"
    # preset name (straight_left_turn, static) or a segment list
    trajectory: str = "straight_left_turn"
    speed: float = 6.0
    duration: float = 30.0
    frame_rate: float = 10.0
    start_x: float = 0.0
    start_y: float = 0.0
    # none puts the vehicle bottom on z = 0
    start_z: float | None = None
    start_yaw: float = 0.0
    # road, ring, or explicit positions "x,y,z;x,y,z"
    sensors: str = "road"
    budget: int = 500
    noise: float = 0.05
    max_range: float = 200.0
    # directory of frame files to track instead of <output>/frames
    input: str = ""


@dataclass
class TrackerSection:
    n_control_points: int = 10
    degree: int = 3
    sigma_m: float = 0.5
    sigma_closure: float = 0.05
    cap_lambda: float = 0.8
    omega_threshold: float = 1e-4
    # none takes the vehicle preset's radius
    init_radius: float | None = None
    forgetting_factor: float = 1.0
    extent_sigma: float = 0.1
    use_alpha: bool = False
    alpha: float = 1.5
    samples_per_span: int = 32


@dataclass
class ProcessSection:
    sigma_x: float | None = None
    sigma_y: float | None = None
    sigma_v: float | None = None
    sigma_yaw: float | None = None
    sigma_omega: float | None = None
    sigma_z: float | None = None
    sigma_vz: float | None = None


@dataclass
class InitSection:
    sigma_pos: float = 1.0
    sigma_v: float = 5.0
    sigma_yaw: float = 0.3
    sigma_omega: float = 0.3
    sigma_z: float = 0.5
    sigma_vz: float = 0.2
    sigma_c: float = 0.5


@dataclass
class MetricsSection:
    samples: int = 200
    yaw_mod_pi: bool = False
    reference: str = "bbox"
    t_from: float = 5.0


@dataclass
class RunSection:
    output: str = "out"
    seed: int = 0


SECTIONS = ("scenario", "tracker", "process", "init", "metrics", "run")


@dataclass
class RunConfig:
    scenario: ScenarioSection = field(default_factory=ScenarioSection)
    tracker: TrackerSection = field(default_factory=TrackerSection)
    process: ProcessSection = field(default_factory=ProcessSection)
    init: InitSection = field(default_factory=InitSection)
    metrics: MetricsSection = field(default_factory=MetricsSection)
    run: RunSection = field(default_factory=RunSection)

    def validate(self) -> "RunConfig":
        tr = self.tracker
        if tr.degree < 1 or tr.n_control_points < tr.degree + 1:
            raise ConfigError("tracker.n_control_points must be >= tracker.degree + 1")
        for sec in SECTIONS:
            for f in fields(getattr(self, sec)):
                v = getattr(getattr(self, sec), f.name)
                if f.name.startswith("sigma") and v is not None and v < 0:
                    raise ConfigError(f"{sec}.{f.name} must be >= 0")
        if tr.sigma_m <= 0 or tr.sigma_closure <= 0:
            raise ConfigError("tracker.sigma_m and tracker.sigma_closure must be > 0")
        if tr.forgetting_factor < 1:
            raise ConfigError("tracker.forgetting_factor must be >= 1")
        if self.scenario.vehicle not in PRESETS:
            raise ConfigError(f"unknown vehicle {self.scenario.vehicle!r}; choose from {', '.join(PRESETS)}")
        if self.metrics.reference not in ("bbox", "position"):
            raise ConfigError("metrics.reference must be 'bbox' or 'position'")
        if self.metrics.samples < 3:
            raise ConfigError("metrics.samples must be >= 3")
        self.trajectory()
        self.sensors()
        return self

    # builders

    @property
    def vehicle(self) -> VehiclePreset:
        return PRESETS[self.scenario.vehicle]

    def segments(self) -> tuple:
        sc = self.scenario
        if sc.trajectory == "straight_left_turn":
            return straight_left_turn(sc.speed, sc.duration)
        if sc.trajectory == "static":
            return static(sc.duration)
        return parse_segments(sc.trajectory)

    def trajectory(self) -> TrajectorySpec:
        sc = self.scenario
        z = sc.start_z
        if z is None:
            z = -float(self.vehicle.profile[:, 1].min())
        try:
            return TrajectorySpec(self.segments(), sc.frame_rate, Pose(sc.start_x, sc.start_y, z, sc.start_yaw))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def sensors(self) -> list[SensorSpec]:
        sc = self.scenario
        if sc.sensors == "road":
            out = road_sensors(sc.budget, sc.noise)
        elif sc.sensors == "ring":
            out = ring_sensors(sc.budget, sc.noise)
        else:
            try:
                spots = [tuple(float(v) for v in item.split(",")) for item in sc.sensors.split(";") if item.strip()]
            except ValueError as exc:
                raise ConfigError(f"bad sensor list {sc.sensors!r}") from exc
            if not spots or any(len(s) != 3 for s in spots):
                raise ConfigError(f"bad sensor list {sc.sensors!r}; expected 'x,y,z;x,y,z'")
            out = [SensorSpec(s, budget=sc.budget, noise=sc.noise) for s in spots]
        try:
            return [replace(s, max_range=sc.max_range) for s in out]
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def tracker_config(self, dt: float | None = None) -> TrackerConfig:
        """Filter settings; ``dt`` is only needed when process noise is overridden."""
        tr = self.tracker
        radius = tr.init_radius
        if radius is None:
            radius = INIT_RADIUS.get(self.scenario.vehicle, 2.0)
        overrides = {f.name: getattr(self.process, f.name) for f in fields(self.process)}
        overrides = {k: v for k, v in overrides.items() if v is not None}
        process = None
        if overrides:
            dt = 1.0 / self.scenario.frame_rate if dt is None else dt
            process = ProcessNoiseConfig.for_timestep(
                dt, extent_sigma=tr.extent_sigma, forgetting_factor=tr.forgetting_factor, **overrides
            )
        init = InitConfig(radius=radius, **{f.name: getattr(self.init, f.name) for f in fields(self.init)})
        return TrackerConfig(
            n_control_points=tr.n_control_points,
            degree=tr.degree,
            width=self.vehicle.width,
            cap_lambda=tr.cap_lambda,
            omega_threshold=tr.omega_threshold,
            use_alpha=tr.use_alpha,
            alpha=tr.alpha,
            samples_per_span=tr.samples_per_span,
            measurement=MeasurementNoiseConfig(tr.sigma_m, tr.sigma_closure),
            init=init,
            process=process,
            extent_sigma=tr.extent_sigma,
            forgetting_factor=tr.forgetting_factor,
        )


def parse_segments(text: str) -> tuple:
    """``straight:length,speed;arc:radius,angle,speed;stop:duration;hold:duration``."""
    kinds = {"straight": (Straight, 2), "arc": (Arc, 3), "stop": (Stop, 1), "hold": (Hold, 1)}
    out = []
    for item in text.split(";"):
        item = item.strip()
        if not item:
            continue
        name, _, args = item.partition(":")
        if name not in kinds:
            raise ConfigError(f"unknown trajectory segment {name!r}")
        cls, arity = kinds[name]
        try:
            vals = [float(v) for v in args.split(",")]
        except ValueError as exc:
            raise ConfigError(f"bad numbers in segment {item!r}") from exc
        if len(vals) != arity:
            raise ConfigError(f"segment {name!r} takes {arity} values, got {len(vals)}")
        out.append(cls(*vals))
    if not out:
        raise ConfigError("empty trajectory")
    return tuple(out)


def _convert(text: str, tp, key: str):
    s = text.strip()
    args = typing.get_args(tp)
    if type(None) in args:
        if s.lower() in ("none", ""):
            return None
        tp = next(a for a in args if a is not type(None))
    try:
        if tp is bool:
            low = s.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(s)
        if tp is int:
            return int(s)
        if tp is float:
            v = float(s)
            if not math.isfinite(v):
                raise ValueError(s)
            return v
    except ValueError:
        raise ConfigError(f"{key}: cannot read {s!r} as {tp.__name__}") from None
    return s


def _format(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


def apply(config: RunConfig, key: str, value: str) -> None:
    sec, _, name = key.strip().partition(".")
    if sec not in SECTIONS or not name:
        raise ConfigError(f"unknown config key {key!r}")
    section = getattr(config, sec)
    hints = typing.get_type_hints(type(section))
    if name not in hints:
        raise ConfigError(f"unknown config key {key!r}")
    setattr(section, name, _convert(value, hints[name], key))


def parse_config(text: str, overrides=()) -> RunConfig:
    """Build a validated config from file text plus ``key=value`` overrides."""
    cfg = RunConfig()
    lines = [(i + 1, line) for i, line in enumerate(text.splitlines())]
    lines += [(None, o) for o in overrides]
    for lineno, raw in lines:
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, eq, value = line.partition("=")
        if not eq:
            where = f"line {lineno}" if lineno else "override"
            raise ConfigError(f"{where}: expected key=value, got {raw!r}")
        apply(cfg, key, value)
    return cfg.validate()


def load_config(path=None, overrides=()) -> RunConfig:
    text = Path(path).read_text() if path else ""
    return parse_config(text, overrides)


def dump_config(config: RunConfig) -> str:
    lines = []
    for sec in SECTIONS:
        section = getattr(config, sec)
        for f in fields(section):
            lines.append(f"{sec}.{f.name}={_format(getattr(section, f.name))}")
    return "\n".join(lines) + "\n"
