"""Peg-insertion task as a gymnasium environment.

One policy step (20 Hz) expands the action into a pose command and gains,
then runs the inner 500 Hz loop: controller, safety gate, world, sensor.
"""
from __future__ import annotations

import enum
import logging
import math
import typing as t
from dataclasses import dataclass, field

import gymnasium as gym
import numpy as np
from gymnasium import spaces

from compliant_rl.controllers import (
    ActionSpaceModel,
    ForceController,
    expand_action,
    position_branch,
)
from compliant_rl.geometry import Pose, Vector, Wrench, pose_error
from compliant_rl.robots import fk, ik
from compliant_rl.safety import (
    GateVerdict,
    SafetyLimits,
    SafetyStats,
    gate,
    is_collision,
)
from compliant_rl.world import Simulation

logger = logging.getLogger(__name__)

SUCCESS_KAPPA = 200.0
COLLISION_KAPPA = -10.0


class Termination(str, enum.Enum):
    SUCCESS = "success"
    TIMEOUT = "timeout"
    COLLISION = "collision"


def _positive6(values: t.Any, name: str) -> Vector:
    arr = np.broadcast_to(np.asarray(values, dtype=np.float64), (6,)).copy()
    if np.any(arr <= 0.0):
        raise ValueError(f"{name} must be positive, got {arr}")
    return arr


@dataclass(frozen=True, eq=False)
class RewardConfig:
    """Weights ``w1..w5`` of distance, action, force, step penalty and terminal bonus."""

    weights: t.Tuple[float, float, float, float, float] = (1.0, 0.1, 0.3, 1.0, 1.0)
    x_max: Vector = field(default_factory=lambda: np.array([0.05] * 3 + [0.5] * 3))
    a_max: Vector = field(default_factory=lambda: np.array([0.005] * 3 + [0.05] * 3))
    f_max: Vector = field(default_factory=lambda: np.array([20.0] * 3 + [2.0] * 3))
    rho: float = -0.01
    l12_smoothing: float = 1e-4
    penalize_collisions: bool = True

    def __post_init__(self) -> None:
        if len(self.weights) != 5 or not all(math.isfinite(w) for w in self.weights):
            raise ValueError(f"need five finite reward weights, got {self.weights}")
        object.__setattr__(self, "x_max", _positive6(self.x_max, "x_max"))
        object.__setattr__(self, "a_max", _positive6(self.a_max, "a_max"))
        object.__setattr__(self, "f_max", _positive6(self.f_max, "f_max"))
        if self.l12_smoothing <= 0.0:
            raise ValueError(f"L1,2 smoothing must be positive, got {self.l12_smoothing}")


@dataclass(frozen=True)
class EpisodeSpec:
    x0: Pose
    goal: Pose
    max_steps: int = 150
    success_threshold: float = 0.001
    orientation_threshold: t.Optional[float] = None
    jitter_std: float = 0.0

    def __post_init__(self) -> None:
        if self.max_steps < 1:
            raise ValueError(f"max_steps must be >= 1, got {self.max_steps}")
        if self.success_threshold <= 0.0 or self.jitter_std < 0.0:
            raise ValueError("success threshold must be positive and jitter non-negative")


@dataclass
class EpisodeRecord:
    cumulative_reward: float = 0.0
    steps: int = 0
    termination: t.Optional[Termination] = None
    holds_no_ik: int = 0
    holds_velocity: int = 0
    policy_period: float = 0.05

    @property
    def collision(self) -> bool:
        return self.termination is Termination.COLLISION

    @property
    def duration(self) -> float:
        """Simulated time the episode took, in seconds."""
        return self.steps * self.policy_period


def lm(y: float) -> float:
    """Linear map of ``[0, 1]`` onto ``[1, 0]``, clamped outside."""
    return 1.0 - min(1.0, max(0.0, y))


def l12_norm(v: Vector, c: float = 1e-4) -> float:
    """Smoothed L1,2 norm ``0.5*|v|^2 + sqrt(c + |v|^2)`` rescaled so 0 -> 0 and |v|=1 -> 1."""
    sq = float(np.dot(v, v))
    raw = 0.5 * sq + math.sqrt(c + sq)
    return (raw - math.sqrt(c)) / (0.5 + math.sqrt(c + 1.0) - math.sqrt(c))


def kappa(cfg: RewardConfig, terminal: t.Optional[Termination]) -> float:
    if terminal is Termination.SUCCESS:
        return SUCCESS_KAPPA
    if terminal is Termination.COLLISION and cfg.penalize_collisions:
        return COLLISION_KAPPA
    return 0.0


def compute_reward(
    cfg: RewardConfig,
    x_e: Vector,
    a: Vector,
    f_ext: Vector,
    terminal: t.Optional[Termination] = None,
) -> float:
    """Shaped reward of one policy step.

    ``a`` is the pose displacement commanded this step (same units as ``a_max``).
    """
    w1, w2, w3, w4, w5 = cfg.weights
    distance = lm(l12_norm(np.asarray(x_e) / cfg.x_max, cfg.l12_smoothing))
    effort = lm(float(np.linalg.norm(np.asarray(a) / cfg.a_max)))
    force = lm(float(np.linalg.norm(np.asarray(f_ext) / cfg.f_max)))
    return w1 * distance + w2 * effort + w3 * force + w4 * cfg.rho + w5 * kappa(cfg, terminal)


def nominal_goal_drive(
    x_e: Vector,
    kp: Vector,
    xdot_e: t.Optional[Vector] = None,
    kd: t.Optional[Vector] = None,
) -> Vector:
    """The position branch that pulls the command toward the goal."""
    kp = np.broadcast_to(np.asarray(kp, dtype=np.float64), (6,))
    kd = np.zeros(6) if kd is None else np.broadcast_to(np.asarray(kd, dtype=np.float64), (6,))
    xdot_e = np.zeros(6) if xdot_e is None else xdot_e
    return position_branch(kp, kd, x_e, xdot_e)


class PegInsertionEnv(gym.Env):  # type: ignore[type-arg]
    """Insert a square peg into a square hole through a learnable force controller."""

    metadata: t.Dict[str, t.Any] = {"render_modes": []}

    def __init__(
        self,
        sim: Simulation,
        controller: ForceController,
        model: ActionSpaceModel,
        limits: SafetyLimits,
        reward: RewardConfig,
        spec: EpisodeSpec,
        xdot_max: Vector,
        inner_dt: float = 0.002,
        substeps: int = 25,
        stats: t.Optional[SafetyStats] = None,
    ) -> None:
        if model.scheme is not controller.scheme:
            raise ValueError(f"{model.name} needs a {model.scheme.value} controller")
        self.sim = sim
        self.controller = controller
        self.model = model
        self.limits = limits
        self.reward_cfg = reward
        self.spec = spec
        self.xdot_max = _positive6(xdot_max, "xdot_max")
        self.inner_dt = inner_dt
        self.substeps = substeps
        self.stats = stats if stats is not None else SafetyStats()
        self.mask = sim.robot.axis_mask
        self.action_space = spaces.Box(-1.0, 1.0, shape=(model.dims,), dtype=np.float64)
        self.observation_space = spaces.Box(-np.inf, np.inf, shape=(18,), dtype=np.float64)
        self.reference_q = sim.robot.q.copy()
        self.x_c = sim.robot.pose()
        self.f_filtered = Wrench.zero()
        self.record = EpisodeRecord(policy_period=self.policy_period)
        self._done = True

    @property
    def policy_period(self) -> float:
        return self.inner_dt * self.substeps

    def initial_configuration(self, x0: Pose) -> Vector:
        """IK of ``x0`` from the reference configuration; raises when unreachable."""
        self.sim.robot.reset(self.reference_q)
        q0 = ik(self.sim.robot, x0)
        if q0 is None:
            raise ValueError(
                f"initial pose {x0.as_array()} is unreachable for {self.sim.robot.name}"
            )
        return q0

    def observe(self) -> Vector:
        x_e = pose_error(self.spec.goal, self.sim.state.pose)
        return np.concatenate(
            [
                x_e / self.reward_cfg.x_max,
                self.sim.state.twist.as_array() / self.xdot_max,
                self.f_filtered.as_array() / self.reward_cfg.f_max,
            ]
        )

    def reset(
        self,
        *,
        seed: t.Optional[int] = None,
        options: t.Optional[t.Dict[str, t.Any]] = None,
    ) -> t.Tuple[Vector, t.Dict[str, t.Any]]:
        super().reset(seed=seed)
        if seed is not None:
            self.sim.sensor.rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
        x0 = self.spec.x0
        if self.spec.jitter_std > 0.0:
            jitter = self.np_random.normal(0.0, self.spec.jitter_std, size=3) * self.mask[:3]
            x0 = Pose(x0.p + jitter, x0.phi)
        q0 = self.initial_configuration(x0)
        self.sim.reset(q0)
        self.controller.reset()
        self.x_c = fk(self.sim.robot, q0)
        self.f_filtered = self.sim.sense()
        self.record = EpisodeRecord(policy_period=self.policy_period)
        self._done = False
        return self.observe(), {}

    def _inner_loop(self, a_x: Vector) -> t.Tuple[t.Dict[GateVerdict, int], bool]:
        counts = {verdict: 0 for verdict in GateVerdict}
        rate = a_x / self.policy_period
        goal = self.spec.goal
        for _ in range(self.substeps):
            state = self.sim.state
            x_e = pose_error(goal, state.pose)
            xdot_e = -state.twist.as_array()
            out = self.controller.step(
                x_e, xdot_e, rate, self.f_filtered.as_array(), self.inner_dt
            )
            candidate = self.x_c.moved(out.increment * self.mask)
            result = gate(
                self.limits, self.sim.robot, candidate, self.f_filtered, self.inner_dt, self.stats
            )
            counts[result.verdict] += 1
            if result.verdict is GateVerdict.ABORT_FORCE:
                return counts, True
            if result.verdict is GateVerdict.EXECUTE:
                assert result.q_c is not None
                self.x_c = candidate
                self.controller.commit(out)
                self.sim.step(result.q_c, self.inner_dt)
            else:
                self.sim.hold()
            self.f_filtered = self.sim.sense()
        return counts, is_collision(self.limits, self.f_filtered)

    def is_success(self) -> bool:
        x_e = pose_error(self.spec.goal, self.sim.state.pose)
        if float(np.linalg.norm(x_e[:3] * self.mask[:3])) >= self.spec.success_threshold:
            return False
        if self.spec.orientation_threshold is not None:
            return float(np.linalg.norm(x_e[3:] * self.mask[3:])) < self.spec.orientation_threshold
        return True

    def step(
        self, action: t.Sequence[float]
    ) -> t.Tuple[Vector, float, bool, bool, t.Dict[str, t.Any]]:
        if self._done:
            raise ValueError("step() called on a finished episode; call reset() first")
        expanded = expand_action(self.model, action)
        self.controller.apply(expanded)
        a_x = expanded.a_x * self.reward_cfg.a_max * self.mask
        counts, collided = self._inner_loop(a_x)

        self.record.steps += 1
        self.record.holds_no_ik += counts[GateVerdict.HOLD_NO_IK]
        self.record.holds_velocity += counts[GateVerdict.HOLD_VELOCITY]
        termination: t.Optional[Termination] = None
        if collided:
            termination = Termination.COLLISION
            self.stats.record_collision()
        elif self.is_success():
            termination = Termination.SUCCESS
        elif self.record.steps >= self.spec.max_steps:
            termination = Termination.TIMEOUT

        x_e = pose_error(self.spec.goal, self.sim.state.pose) * self.mask
        reward = compute_reward(
            self.reward_cfg, x_e, a_x, self.f_filtered.as_array(), termination
        )
        self.record.cumulative_reward += reward
        self.record.termination = termination
        terminated = termination in (Termination.SUCCESS, Termination.COLLISION)
        truncated = termination is Termination.TIMEOUT
        self._done = terminated or truncated
        if self._done:
            logger.debug(
                f"Episode ended by {termination.value if termination else None} "
                f"after {self.record.steps} steps"
            )
        info: t.Dict[str, t.Any] = {
            "verdicts": {v.value: n for v, n in counts.items()},
            "true_wrench": self.sim.state.wrench.as_array(),
            "termination": termination,
            "record": self.record,
        }
        return self.observe(), float(reward), terminated, truncated, info
