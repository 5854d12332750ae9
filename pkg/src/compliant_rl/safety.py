"""Fail-safe gate for every streamed command.

Each inner step the requested pose ``x_c`` passes three checks before the
robot may move: the contact force measured so far, the existence of an IK
solution and the joint velocity the command would require. Proactive
failures hold the robot where it is; a force violation ends the episode.
"""
from __future__ import annotations

import enum
import logging
import typing as t
from dataclasses import dataclass, field

import numpy as np

from compliant_rl.geometry import Pose, Vector, Wrench
from compliant_rl.robots import RobotModel, ik

logger = logging.getLogger(__name__)


class GateVerdict(str, enum.Enum):
    EXECUTE = "execute"
    HOLD_NO_IK = "hold_no_ik"
    HOLD_VELOCITY = "hold_velocity"
    ABORT_FORCE = "abort_force"

    @property
    def is_hold(self) -> bool:
        return self in (GateVerdict.HOLD_NO_IK, GateVerdict.HOLD_VELOCITY)


@dataclass(frozen=True, eq=False)
class SafetyLimits:
    """Joint velocity limit per joint and contact wrench limit per task axis."""

    qdot_max: Vector
    f_max: Vector

    def __post_init__(self) -> None:
        qdot = np.asarray(self.qdot_max, dtype=np.float64).reshape(-1)
        f_max = np.broadcast_to(np.asarray(self.f_max, dtype=np.float64), (6,)).copy()
        if np.any(qdot <= 0.0) or np.any(f_max <= 0.0):
            raise ValueError(f"safety limits must be strictly positive: {qdot}, {f_max}")
        object.__setattr__(self, "qdot_max", qdot)
        object.__setattr__(self, "f_max", f_max)

    @classmethod
    def from_force_torque(
        cls, qdot_max: t.Sequence[float], force: float, torque: float
    ) -> SafetyLimits:
        return cls(np.asarray(qdot_max, dtype=np.float64), np.array([force] * 3 + [torque] * 3))


@dataclass
class GateResult:
    verdict: GateVerdict
    q_c: t.Optional[Vector] = None


@dataclass
class SafetyStats:
    """Gate outcomes accumulated over a run."""

    holds_no_ik: int = 0
    holds_velocity: int = 0
    collisions: int = 0
    executed: int = field(default=0, repr=False)

    def record(self, verdict: GateVerdict) -> None:
        if verdict is GateVerdict.HOLD_NO_IK:
            self.holds_no_ik += 1
        elif verdict is GateVerdict.HOLD_VELOCITY:
            self.holds_velocity += 1
        elif verdict is GateVerdict.EXECUTE:
            self.executed += 1

    def record_collision(self) -> None:
        self.collisions += 1

    def as_dict(self) -> t.Dict[str, int]:
        return {
            "holds_no_ik": self.holds_no_ik,
            "holds_velocity": self.holds_velocity,
            "collisions": self.collisions,
        }


def is_collision(limits: SafetyLimits, f_ext: Wrench) -> bool:
    """True when any force or torque component strictly exceeds its limit."""
    return bool(np.any(np.abs(f_ext.as_array()) > limits.f_max))


def gate(
    limits: SafetyLimits,
    robot: RobotModel,
    x_c: Pose,
    f_ext: Wrench,
    dt: float,
    stats: t.Optional[SafetyStats] = None,
) -> GateResult:
    """Validate one streamed command.

    Checks run force, then IK, then joint velocity. The streamed-control loop
    this follows lists IK and velocity before force, but there the force
    reading belongs to the command just sent, while here ``f_ext`` is the
    filtered force observed after the previous execution. Checking it first
    closes the previous step and makes an over-limit force abort whatever
    ``x_c`` is, including commands that would otherwise be held.

    The velocity check compares against the last executed command. Nothing
    here touches the robot; the caller executes ``q_c`` only on ``EXECUTE``.
    """
    if is_collision(limits, f_ext):
        result = GateResult(GateVerdict.ABORT_FORCE)
    else:
        q_c = ik(robot, x_c)
        if q_c is None:
            result = GateResult(GateVerdict.HOLD_NO_IK)
        elif np.any(np.abs(q_c - robot.q_command) / dt > limits.qdot_max):
            result = GateResult(GateVerdict.HOLD_VELOCITY)
        else:
            result = GateResult(GateVerdict.EXECUTE, q_c)
    if stats is not None:
        stats.record(result.verdict)
    if result.verdict is not GateVerdict.EXECUTE:
        logger.debug(f"Gate verdict {result.verdict.value}")
    return result
