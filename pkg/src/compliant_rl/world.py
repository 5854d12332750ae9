"""Penalty contact between a square peg and a task board, plus the simulated F/T sensor.

Contacts are Kelvin-Voigt springs: each overlapping feature pushes back with
``max(0, k_c * d + c_c * d')`` along its normal, with regularised Coulomb
friction in the tangent plane. Wrenches are those the board exerts on the
peg, expressed in the world frame about the peg's bottom-face centre.
"""
from __future__ import annotations

import logging
import typing as t
from dataclasses import dataclass, field

import numpy as np

from compliant_rl.geometry import (
    LowPassFilter,
    Pose,
    Twist,
    Vector,
    Wrench,
    lowpass_step,
    orientation_error,
)
from compliant_rl.robots import RobotModel

logger = logging.getLogger(__name__)

_Z = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class ContactWorld:
    """Task board with a square hole; dimensions in metres."""

    surface_height: float = 0.0
    hole_center: t.Tuple[float, float] = (0.0, 0.0)
    peg_half_width: float = 0.01
    peg_length: float = 0.05
    clearance: float = 0.001
    hole_depth: float = 0.02
    contact_stiffness: float = 1.0e4
    contact_damping: float = 50.0
    friction: float = 0.3
    friction_smoothing: float = 1.0e-3

    def __post_init__(self) -> None:
        for name in (
            "peg_half_width",
            "peg_length",
            "hole_depth",
            "contact_stiffness",
            "friction_smoothing",
        ):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("clearance", "contact_damping", "friction"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)}")

    @property
    def hole_half_width(self) -> float:
        return self.peg_half_width + self.clearance / 2.0

    @property
    def floor_height(self) -> float:
        return self.surface_height - self.hole_depth


@dataclass
class ContactFeature:
    """One active contact: penetration depth along ``normal`` at offset ``point``."""

    name: str
    normal: Vector
    depth: float
    point: Vector


def contact_features(world: ContactWorld, peg_pose: Pose) -> t.List[ContactFeature]:
    """Enumerate overlapping features between the peg and the board.

    The board top only pushes when the vertical penetration is no larger than
    the peg's overlap past the hole edge; deeper than that the peg is inside
    the hole and the side walls push instead.
    """
    w = world.peg_half_width
    half = world.hole_half_width
    dx = float(peg_pose.p[0] - world.hole_center[0])
    dy = float(peg_pose.p[1] - world.hole_center[1])
    depth_top = world.surface_height - float(peg_pose.p[2])
    if depth_top <= 0.0:
        return []

    features: t.List[ContactFeature] = []
    over_x = max(0.0, abs(dx) + w - half)
    over_y = max(0.0, abs(dy) + w - half)
    sx = 1.0 if dx >= 0.0 else -1.0
    sy = 1.0 if dy >= 0.0 else -1.0

    if max(over_x, over_y) > 0.0 and depth_top <= max(over_x, over_y):
        # resting on the edge: contact point sits over the board, not over the hole
        px = sx * w if 0.0 < over_x < 2.0 * w else 0.0
        py = sy * w if 0.0 < over_y < 2.0 * w else 0.0
        features.append(ContactFeature("top", _Z.copy(), depth_top, np.array([px, py, 0.0])))
        return features

    inserted = min(depth_top, world.peg_length)
    if over_x > 0.0:
        features.append(
            ContactFeature(
                "wall_x",
                np.array([-sx, 0.0, 0.0]),
                over_x,
                np.array([sx * w, 0.0, inserted / 2.0]),
            )
        )
    if over_y > 0.0:
        features.append(
            ContactFeature(
                "wall_y",
                np.array([0.0, -sy, 0.0]),
                over_y,
                np.array([0.0, sy * w, inserted / 2.0]),
            )
        )
    depth_floor = world.floor_height - float(peg_pose.p[2])
    if depth_floor > 0.0:
        features.append(ContactFeature("floor", _Z.copy(), depth_floor, np.zeros(3)))
    return features


def feature_wrench(world: ContactWorld, feature: ContactFeature, velocity: Vector) -> Wrench:
    """Spring-damper normal force plus regularised friction for one feature."""
    n = feature.normal
    rate = -float(np.dot(velocity, n))
    normal = max(0.0, world.contact_stiffness * feature.depth + world.contact_damping * rate)
    v_t = velocity - np.dot(velocity, n) * n
    speed = float(np.linalg.norm(v_t))
    friction = -world.friction * normal * v_t / np.hypot(speed, world.friction_smoothing)
    force = normal * n + friction
    return Wrench(force, np.cross(feature.point, force))


def contact_wrench(world: ContactWorld, peg_pose: Pose, peg_twist: Twist) -> Wrench:
    total = np.zeros(6)
    for feature in contact_features(world, peg_pose):
        total += feature_wrench(world, feature, peg_twist.linear).as_array()
    return Wrench.from_array(total)


@dataclass(eq=False)
class FTSensor:
    """Wrist force/torque sensor: additive Gaussian noise, then a low-pass filter."""

    noise_std: Vector
    filter: LowPassFilter
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))

    def __post_init__(self) -> None:
        self.noise_std = np.broadcast_to(np.asarray(self.noise_std, dtype=np.float64), (6,)).copy()
        if np.any(self.noise_std < 0.0):
            raise ValueError(f"noise std must be non-negative, got {self.noise_std}")

    def reset(self, wrench: t.Optional[Wrench] = None) -> None:
        self.filter.reset(None if wrench is None else wrench.as_array())


def sense(sensor: FTSensor, true_wrench: Wrench) -> Wrench:
    # the noise stream is drawn on every call so sequences stay aligned across noise levels
    noise = sensor.rng.standard_normal(6) * sensor.noise_std
    return Wrench.from_array(lowpass_step(sensor.filter, true_wrench.as_array() + noise))


@dataclass
class WorldState:
    pose: Pose
    twist: Twist
    wrench: Wrench


class Simulation:
    """The robot carrying the peg, the board it touches and the sensor on its wrist."""

    def __init__(self, robot: RobotModel, contact: ContactWorld, sensor: FTSensor) -> None:
        self.robot = robot
        self.contact = contact
        self.sensor = sensor
        self.state = WorldState(robot.pose(), Twist.zero(), Wrench.zero())

    def reset(self, q0: t.Sequence[float]) -> WorldState:
        self.robot.reset(q0)
        pose = self.robot.pose()
        wrench = contact_wrench(self.contact, pose, Twist.zero())
        self.state = WorldState(pose, Twist.zero(), wrench)
        self.sensor.reset(self.state.wrench)
        return self.state

    def step(self, q_c: Vector, dt: float) -> WorldState:
        self.state = world_step(self, self.robot, q_c, dt)
        return self.state

    def hold(self) -> WorldState:
        """A substep without an executed command: pose frozen, twist zero."""
        pose = self.state.pose
        wrench = contact_wrench(self.contact, pose, Twist.zero())
        self.state = WorldState(pose, Twist.zero(), wrench)
        return self.state

    def sense(self) -> Wrench:
        return sense(self.sensor, self.state.wrench)


def world_step(world: Simulation, robot: RobotModel, q_c: Vector, dt: float) -> WorldState:
    """Move ``robot`` toward ``q_c`` for ``dt`` and evaluate the contact wrench.

    The twist is the finite difference of consecutive end-effector poses.
    """
    before = world.state.pose
    robot.actuate(q_c, dt)
    after = robot.pose()
    twist = Twist(
        (after.p - before.p) / dt,
        orientation_error(after.phi, before.phi) / dt,
    )
    wrench = contact_wrench(world.contact, after, twist)
    return WorldState(after, twist, wrench)
