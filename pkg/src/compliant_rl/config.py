"""Run configuration: YAML schema, overrides, hashing and component builders."""
from __future__ import annotations

import hashlib
import json
import logging
import math
import typing as t
from pathlib import Path

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from compliant_rl.controllers import (
    KP_F,
    KI_RATIO,
    KP_X,
    STIFFNESS,
    ACTION_SPACE_MODELS,
    AdmittanceController,
    ForceController,
    GainSchedule,
    ParallelController,
    Scheme,
    get_action_space,
)
from compliant_rl.env import EpisodeSpec, PegInsertionEnv, RewardConfig
from compliant_rl.geometry import LowPassFilter, Pose, Quaternion
from compliant_rl.robots import FreeFlyer, Planar3R, RobotModel
from compliant_rl.safety import SafetyLimits, SafetyStats
from compliant_rl.sac import SACAgent, SACConfig
from compliant_rl.world import ContactWorld, FTSensor, Simulation

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
PROFILE_EPISODE_LENGTH = {"sim": 150, "real": 200}

# sections that define the task and the agent's interface to it
ENVIRONMENT_SECTIONS = ("model", "task", "robot", "controller", "world", "safety", "reward")

Axes = t.Union[float, t.List[float]]


class ConfigError(ValueError):
    """Configuration could not be loaded; ``diagnostics`` lists every problem found."""

    def __init__(self, message: str, diagnostics: t.Optional[t.List[str]] = None) -> None:
        self.diagnostics = diagnostics or []
        detail = "".join(f"\n  - {d}" for d in self.diagnostics)
        super().__init__(f"{message}{detail}")


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


def _axes(value: Axes, name: str, size: int = 6) -> Axes:
    if isinstance(value, list):
        if len(value) != size:
            raise ValueError(f"{name} needs 1 or {size} values, got {len(value)}")
        if not all(math.isfinite(v) for v in value):
            raise ValueError(f"{name} must be finite")
    elif not math.isfinite(value):
        raise ValueError(f"{name} must be finite")
    return value


def _six(value: Axes) -> np.ndarray:
    return np.broadcast_to(np.asarray(value, dtype=np.float64), (6,)).copy()


def _split(translation: float, rotation: float) -> np.ndarray:
    return np.array([translation] * 3 + [rotation] * 3)


class ScheduleSection(Section):
    base: Axes
    range: Axes

    @field_validator("base", "range")
    @classmethod
    def _check_axes(cls, v: Axes) -> Axes:
        return _axes(v, "schedule entry")

    @field_validator("range")
    @classmethod
    def _non_negative(cls, v: Axes) -> Axes:
        if min(v if isinstance(v, list) else [v]) < 0.0:
            raise ValueError("range must be >= 0")
        return v

    def schedule(self) -> GainSchedule:
        return GainSchedule(_six(self.base), _six(self.range))


class TaskSection(Section):
    profile: t.Literal["sim", "real"] = "sim"
    max_steps: t.Optional[int] = Field(default=None, ge=1)
    goal_position: t.List[float] = [0.0, 0.0, -0.015]
    start_position: t.List[float] = [0.004, -0.003, 0.01]
    success_threshold: float = Field(default=0.001, gt=0.0)
    orientation_threshold: t.Optional[float] = Field(default=None, gt=0.0)
    jitter_std: float = Field(default=0.0005, ge=0.0)
    inner_dt: float = Field(default=0.002, gt=0.0)
    substeps: int = Field(default=25, ge=1)
    xdot_max_translation: float = Field(default=0.5, gt=0.0)
    xdot_max_rotation: float = Field(default=2.0, gt=0.0)

    @field_validator("goal_position", "start_position")
    @classmethod
    def _three(cls, v: t.List[float]) -> t.List[float]:
        if len(v) != 3:
            raise ValueError("positions need 3 components")
        return v

    @property
    def episode_length(self) -> int:
        if self.max_steps is not None:
            return self.max_steps
        return PROFILE_EPISODE_LENGTH[self.profile]


class RobotSection(Section):
    kind: t.Literal["free_flyer", "planar_3r"] = "free_flyer"
    time_constant: float = Field(default=0.02, ge=0.0)
    qdot_max: t.Optional[t.List[float]] = None
    workspace_low: t.List[float] = [-0.2, -0.2, -0.1]
    workspace_high: t.List[float] = [0.2, 0.2, 0.3]
    link_lengths: t.List[float] = [0.3, 0.3, 0.1]
    base_position: t.List[float] = [-0.4, 0.0, 0.25]

    @field_validator("qdot_max")
    @classmethod
    def _positive(cls, v: t.Optional[t.List[float]]) -> t.Optional[t.List[float]]:
        if v is not None and min(v) <= 0.0:
            raise ValueError("qdot_max must be strictly positive")
        return v

    def joint_speed_limits(self) -> t.List[float]:
        if self.qdot_max is not None:
            return self.qdot_max
        if self.kind == "free_flyer":
            return [3.5] * 3 + [2.0] * 3
        return [6.0] * 3


class ControllerSection(Section):
    kp_x: ScheduleSection = ScheduleSection(base=40.0, range=20.0)
    kp_f: ScheduleSection = ScheduleSection(base=0.002, range=0.0015)
    stiffness: ScheduleSection = ScheduleSection(base=400.0, range=300.0)
    inertia: float = Field(default=0.1, gt=0.0)
    zeta: float = Field(default=1.0, gt=0.0)
    velocity_limit: float = Field(default=1.0, gt=0.0)
    integration_substeps: int = Field(default=10, ge=1)
    windup_ratio: float = Field(default=10.0, gt=0.0)
    a_max_translation: float = Field(default=0.005, gt=0.0)
    a_max_rotation: float = Field(default=0.05, gt=0.0)


class WorldSection(Section):
    peg_half_width: float = Field(default=0.01, gt=0.0)
    peg_length: float = Field(default=0.05, gt=0.0)
    clearance: float = Field(default=0.001, ge=0.0)
    hole_depth: float = Field(default=0.02, gt=0.0)
    contact_stiffness: float = Field(default=1.0e4, gt=0.0)
    contact_damping: float = Field(default=50.0, ge=0.0)
    friction: float = Field(default=0.3, ge=0.0)
    noise_force: float = Field(default=0.05, ge=0.0)
    noise_torque: float = Field(default=0.005, ge=0.0)
    filter_cutoff_hz: float = Field(default=50.0, gt=0.0)


class SafetySection(Section):
    force_limit: float = Field(default=20.0, gt=0.0)
    torque_limit: float = Field(default=2.0, gt=0.0)


class RewardSection(Section):
    weights: t.List[float] = [1.0, 0.1, 0.3, 1.0, 1.0]
    x_max: Axes = [0.05] * 3 + [0.5] * 3
    rho: float = -0.01
    l12_smoothing: float = Field(default=1e-4, gt=0.0)
    penalize_collisions: bool = True

    @field_validator("weights")
    @classmethod
    def _five(cls, v: t.List[float]) -> t.List[float]:
        if len(v) != 5:
            raise ValueError("weights need exactly 5 entries")
        return v

    @field_validator("x_max")
    @classmethod
    def _maxima(cls, v: Axes) -> Axes:
        v = _axes(v, "x_max")
        if min(v if isinstance(v, list) else [v]) <= 0.0:
            raise ValueError("x_max must be strictly positive")
        return v


class SACSection(Section):
    gamma: float = Field(default=0.99, gt=0.0, lt=1.0)
    tau: float = Field(default=0.005, gt=0.0, le=1.0)
    actor_lr: float = Field(default=3e-4, gt=0.0)
    critic_lr: float = Field(default=3e-4, gt=0.0)
    alpha_lr: float = Field(default=3e-4, gt=0.0)
    batch_size: int = Field(default=256, ge=1)
    initial_alpha: float = Field(default=0.2, gt=0.0)
    hidden_sizes: t.List[int] = [64, 64]
    buffer_capacity: int = Field(default=100_000, ge=1)
    warmup_steps: int = Field(default=1000, ge=0)

    def agent_config(self) -> SACConfig:
        return SACConfig(
            gamma=self.gamma,
            tau=self.tau,
            actor_lr=self.actor_lr,
            critic_lr=self.critic_lr,
            alpha_lr=self.alpha_lr,
            batch_size=self.batch_size,
            initial_alpha=self.initial_alpha,
            hidden_sizes=tuple(self.hidden_sizes),
        )


class TrainingSection(Section):
    total_steps: int = Field(default=30_000, ge=1)
    checkpoint_every: int = Field(default=5_000, ge=1)
    log_every_episodes: int = Field(default=10, ge=1)


class RunConfig(Section):
    schema_version: t.Literal[1] = SCHEMA_VERSION
    seed: int = 0
    model: str = "P-14"
    task: TaskSection = TaskSection()
    robot: RobotSection = RobotSection()
    controller: ControllerSection = ControllerSection()
    world: WorldSection = WorldSection()
    safety: SafetySection = SafetySection()
    reward: RewardSection = RewardSection()
    sac: SACSection = SACSection()
    training: TrainingSection = TrainingSection()

    @field_validator("model")
    @classmethod
    def _known_model(cls, v: str) -> str:
        if v not in ACTION_SPACE_MODELS:
            known = ", ".join(ACTION_SPACE_MODELS)
            raise ValueError(f"unknown model {v!r}; expected one of {known}")
        return v

    @model_validator(mode="after")
    def _reachable_start(self) -> RunConfig:
        if self.robot.kind == "free_flyer":
            for name in ("start_position", "goal_position"):
                p = getattr(self.task, name)
                low, high = self.robot.workspace_low, self.robot.workspace_high
                if any(v < lo or v > hi for v, lo, hi in zip(p, low, high)):
                    raise ValueError(f"task.{name} {p} lies outside the robot workspace box")
        return self

    @property
    def scheme(self) -> Scheme:
        return get_action_space(self.model).scheme


def _format_errors(error: ValidationError) -> t.List[str]:
    return [f"{'.'.join(str(p) for p in e['loc']) or '<root>'}: {e['msg']}" for e in error.errors()]


def parse_override(override: str) -> t.Tuple[t.List[str], t.Any]:
    """Split ``a.b.c=value`` into its key path and YAML-parsed value."""
    key, sep, raw = override.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"Invalid override {override!r}", ["expected dotted.key=value"])
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as e:
        raise ConfigError(f"Invalid override {override!r}", [str(e)]) from e
    return key.strip().split("."), value


def apply_overrides(data: t.Dict[str, t.Any], overrides: t.Iterable[str]) -> t.Dict[str, t.Any]:
    for override in overrides:
        path, value = parse_override(override)
        node = data
        for key in path[:-1]:
            child = node.setdefault(key, {})
            if not isinstance(child, dict):
                raise ConfigError(f"Invalid override {override!r}", [f"{key} is not a section"])
            node = child
        node[path[-1]] = value
    return data


def load_config(
    path: t.Optional[t.Union[str, Path]] = None,
    overrides: t.Iterable[str] = (),
) -> RunConfig:
    """Read a YAML config (or the defaults), apply overrides and validate."""
    data: t.Dict[str, t.Any] = {}
    if path is not None:
        try:
            loaded = yaml.safe_load(Path(path).read_text())
        except (OSError, yaml.YAMLError) as e:
            raise ConfigError(f"Could not read config {path}", [str(e)]) from e
        if loaded is not None and not isinstance(loaded, dict):
            raise ConfigError(f"Config {path} must be a mapping", [type(loaded).__name__])
        data = loaded or {}
    data = apply_overrides(data, overrides)
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError("Invalid configuration", _format_errors(e)) from e


def dump_config(cfg: RunConfig, path: t.Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text(yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=False))
    return path


def config_hash(cfg: RunConfig) -> str:
    """SHA-256 of the canonical JSON of the environment-defining sections.

    Seed, training length and learner hyperparameters are left out so a
    checkpoint stays valid for evaluation under a different budget.
    """
    dumped = cfg.model_dump(mode="json", include=set(ENVIRONMENT_SECTIONS))
    canonical = json.dumps(dumped, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def build_robot(cfg: RunConfig) -> RobotModel:
    r = cfg.robot
    if r.kind == "free_flyer":
        return FreeFlyer(
            r.joint_speed_limits(), r.workspace_low, r.workspace_high, r.time_constant
        )
    base = Pose(
        np.asarray(r.base_position),
        Quaternion.from_axis_angle((1.0, 0.0, 0.0), math.pi / 2.0),
    )
    robot = Planar3R(
        r.link_lengths, r.joint_speed_limits(), base=base, time_constant=r.time_constant
    )
    # elbow-up reference so the start IK picks the branch above the board
    robot.reset([0.0, -0.5, 0.5])
    return robot


def build_controller(cfg: RunConfig) -> ForceController:
    c = cfg.controller
    schedules = {
        KP_X: c.kp_x.schedule(),
        KP_F: c.kp_f.schedule(),
        STIFFNESS: c.stiffness.schedule(),
    }
    if cfg.scheme is Scheme.PARALLEL:
        # bound the integral contribution to windup_ratio times the proportional one at the limit
        f_max = _split(cfg.safety.force_limit, cfg.safety.torque_limit)
        return ParallelController(schedules, integral_limit=c.windup_ratio * f_max / KI_RATIO)
    return AdmittanceController(
        schedules,
        inertia=c.inertia,
        zeta=c.zeta,
        velocity_limit=c.velocity_limit,
        substeps=c.integration_substeps,
    )


def build_env(cfg: RunConfig, stats: t.Optional[SafetyStats] = None) -> PegInsertionEnv:
    robot = build_robot(cfg)
    w = cfg.world
    contact = ContactWorld(
        peg_half_width=w.peg_half_width,
        peg_length=w.peg_length,
        clearance=w.clearance,
        hole_depth=w.hole_depth,
        contact_stiffness=w.contact_stiffness,
        contact_damping=w.contact_damping,
        friction=w.friction,
    )
    sensor = FTSensor(
        _split(w.noise_force, w.noise_torque),
        LowPassFilter.from_cutoff(w.filter_cutoff_hz, cfg.task.inner_dt),
        np.random.default_rng(cfg.seed),
    )
    c = cfg.controller
    f_max = _split(cfg.safety.force_limit, cfg.safety.torque_limit)
    reward = RewardConfig(
        weights=t.cast(t.Tuple[float, float, float, float, float], tuple(cfg.reward.weights)),
        x_max=_six(cfg.reward.x_max),
        a_max=_split(c.a_max_translation, c.a_max_rotation),
        f_max=f_max,
        rho=cfg.reward.rho,
        l12_smoothing=cfg.reward.l12_smoothing,
        penalize_collisions=cfg.reward.penalize_collisions,
    )
    spec = EpisodeSpec(
        x0=Pose(np.asarray(cfg.task.start_position)),
        goal=Pose(np.asarray(cfg.task.goal_position)),
        max_steps=cfg.task.episode_length,
        success_threshold=cfg.task.success_threshold,
        orientation_threshold=cfg.task.orientation_threshold,
        jitter_std=cfg.task.jitter_std,
    )
    env = PegInsertionEnv(
        sim=Simulation(robot, contact, sensor),
        controller=build_controller(cfg),
        model=get_action_space(cfg.model),
        limits=SafetyLimits(np.asarray(robot.qdot_max), f_max),
        reward=reward,
        spec=spec,
        xdot_max=_split(cfg.task.xdot_max_translation, cfg.task.xdot_max_rotation),
        inner_dt=cfg.task.inner_dt,
        substeps=cfg.task.substeps,
        stats=stats,
    )
    try:
        env.initial_configuration(spec.x0)
        env.initial_configuration(spec.goal)
    except ValueError as e:
        raise ConfigError("Task is not reachable", [str(e)]) from e
    return env


def build_agent(cfg: RunConfig, obs_dim: int, act_dim: int, rng: np.random.Generator) -> SACAgent:
    return SACAgent(obs_dim, act_dim, cfg.sac.agent_config(), rng)
