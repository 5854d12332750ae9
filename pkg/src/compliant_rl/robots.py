"""Kinematic robot models: a 6-DOF free-flyer and a planar 3R arm with analytic IK.

Both models are position controlled. ``q`` is the actual configuration and
``q_command`` the last joint command the safety gate let through; the actual
configuration follows the command through a first-order actuator lag.
"""
from __future__ import annotations

import abc
import logging
import math
import typing as t

import numpy as np

from compliant_rl.geometry import Pose, Quaternion, Vector

logger = logging.getLogger(__name__)

ROUND_TRIP_TOLERANCE = 1e-6


def lag_coefficient(dt: float, time_constant: float) -> float:
    """Fraction of the remaining command error closed in one step of length ``dt``."""
    if time_constant <= 0.0:
        return 1.0
    return 1.0 - math.exp(-dt / time_constant)


def wrap_near(angle: float, reference: float) -> float:
    """Shift ``angle`` by multiples of 2*pi to lie within pi of ``reference``."""
    return reference + math.remainder(angle - reference, 2.0 * math.pi)


class RobotModel(abc.ABC):
    """A position-controlled manipulator seen through fk/ik."""

    name: str
    dof: int

    def __init__(self, qdot_max: t.Sequence[float], time_constant: float = 0.0) -> None:
        qdot = np.asarray(qdot_max, dtype=np.float64).reshape(-1)
        if qdot.shape != (self.dof,):
            qdot = np.broadcast_to(qdot, (self.dof,)).copy()
        if np.any(qdot <= 0.0):
            raise ValueError(f"qdot_max must be positive, got {qdot}")
        if time_constant < 0.0:
            raise ValueError(f"actuator time constant must be >= 0, got {time_constant}")
        self.qdot_max = qdot
        self.time_constant = time_constant
        self.q = np.zeros(self.dof)
        self.q_command = np.zeros(self.dof)

    @property
    @abc.abstractmethod
    def axis_mask(self) -> Vector:
        """Task-space axes the model can move along (1) or not (0)."""

    @abc.abstractmethod
    def forward(self, q: Vector) -> Pose:
        ...

    @abc.abstractmethod
    def inverse(self, x_c: Pose) -> t.Optional[Vector]:
        """Joint configuration reaching ``x_c``, or ``None`` when there is none."""

    def reset(self, q: t.Sequence[float]) -> None:
        self.q = np.array(q, dtype=np.float64)
        self.q_command = self.q.copy()

    def actuate(self, q_c: Vector, dt: float) -> None:
        """Accept ``q_c`` as the new command and advance the actuator lag by ``dt``."""
        self.q_command = np.array(q_c, dtype=np.float64)
        beta = lag_coefficient(dt, self.time_constant)
        if beta == 1.0:
            self.q = self.q_command.copy()
        else:
            self.q = self.q + beta * (self.q_command - self.q)

    def pose(self) -> Pose:
        return self.forward(self.q)


class FreeFlyer(RobotModel):
    """Configuration is the pose itself: ``q = [p, rotation vector]``."""

    name = "free_flyer"
    dof = 6

    def __init__(
        self,
        qdot_max: t.Sequence[float],
        workspace_low: t.Sequence[float] = (-0.2, -0.2, -0.1),
        workspace_high: t.Sequence[float] = (0.2, 0.2, 0.3),
        time_constant: float = 0.0,
    ) -> None:
        super().__init__(qdot_max, time_constant)
        self.workspace_low = np.asarray(workspace_low, dtype=np.float64)
        self.workspace_high = np.asarray(workspace_high, dtype=np.float64)
        if np.any(self.workspace_low >= self.workspace_high):
            raise ValueError("workspace box must have low < high on every axis")

    @property
    def axis_mask(self) -> Vector:
        return np.ones(6)

    def forward(self, q: Vector) -> Pose:
        q = np.asarray(q, dtype=np.float64)
        return Pose(q[:3], Quaternion.from_rotation_vector(q[3:]))

    def inverse(self, x_c: Pose) -> t.Optional[Vector]:
        if np.any(x_c.p < self.workspace_low) or np.any(x_c.p > self.workspace_high):
            return None
        return x_c.as_array()


class Planar3R(RobotModel):
    """Three revolute joints in a plane, mounted through a fixed base pose.

    The chain lives in the base frame's x-y plane; ``tool`` is a fixed
    rotation applied after the last joint. With the default mounting the arm
    plane is the world x-z plane and a zero configuration has identity
    orientation.
    """

    name = "planar_3r"
    dof = 3

    def __init__(
        self,
        link_lengths: t.Sequence[float] = (0.3, 0.3, 0.1),
        qdot_max: t.Sequence[float] = (3.0, 3.0, 3.0),
        base: t.Optional[Pose] = None,
        tool: t.Optional[Quaternion] = None,
        time_constant: float = 0.0,
    ) -> None:
        super().__init__(qdot_max, time_constant)
        lengths = [float(v) for v in link_lengths]
        if len(lengths) != 3 or min(lengths) <= 0.0:
            raise ValueError(f"need three positive link lengths, got {link_lengths}")
        self.l1, self.l2, self.l3 = lengths
        self.base = base if base is not None else Pose(
            np.zeros(3), Quaternion.from_axis_angle((1.0, 0.0, 0.0), math.pi / 2.0)
        )
        self.tool = tool if tool is not None else Quaternion.from_axis_angle(
            (1.0, 0.0, 0.0), -math.pi / 2.0
        )

    @property
    def reach(self) -> float:
        return self.l1 + self.l2 + self.l3

    @property
    def axis_mask(self) -> Vector:
        # the two in-plane directions plus rotation about the plane normal
        rot = self.base.phi.as_matrix()
        mask = np.zeros(6)
        for local, offset in ((0, 0), (1, 0), (2, 3)):
            mask[offset : offset + 3] += np.abs(rot[:, local]) > 0.5
        return mask

    def planar_forward(self, q: t.Sequence[float]) -> t.Tuple[float, float, float]:
        """Chain end in the arm plane: ``(x, y, theta)``."""
        q1, q2, q3 = (float(v) for v in q)
        a12 = q1 + q2
        theta = a12 + q3
        x = self.l1 * math.cos(q1) + self.l2 * math.cos(a12) + self.l3 * math.cos(theta)
        y = self.l1 * math.sin(q1) + self.l2 * math.sin(a12) + self.l3 * math.sin(theta)
        return x, y, theta

    def forward(self, q: Vector) -> Pose:
        x, y, theta = self.planar_forward(q)
        p = self.base.p + self.base.phi.rotate((x, y, 0.0))
        joint = Quaternion.from_axis_angle((0.0, 0.0, 1.0), theta)
        phi = self.base.phi.multiply(joint).multiply(self.tool).normalized()
        return Pose(p, phi)

    def _to_plane(self, x_c: Pose) -> t.Optional[t.Tuple[float, float, float]]:
        local_p = self.base.phi.conjugate().rotate(x_c.p - self.base.p)
        rel = self.base.phi.conjugate().multiply(x_c.phi).multiply(self.tool.conjugate())
        rel = rel.normalized()
        if abs(local_p[2]) > ROUND_TRIP_TOLERANCE or np.any(
            np.abs(rel.eps[:2]) > ROUND_TRIP_TOLERANCE
        ):
            return None
        theta = 2.0 * math.atan2(float(rel.eps[2]), rel.eta)
        return float(local_p[0]), float(local_p[1]), theta

    def inverse(self, x_c: Pose) -> t.Optional[Vector]:
        planar = self._to_plane(x_c)
        if planar is None:
            return None
        x, y, theta = planar
        wx = x - self.l3 * math.cos(theta)
        wy = y - self.l3 * math.sin(theta)
        c2 = (wx * wx + wy * wy - self.l1**2 - self.l2**2) / (2.0 * self.l1 * self.l2)
        if abs(c2) > 1.0 + 1e-12:
            return None
        c2 = min(1.0, max(-1.0, c2))

        current = self.q_command
        best: t.Optional[Vector] = None
        best_distance = math.inf
        for elbow in (math.acos(c2), -math.acos(c2)):
            q1 = math.atan2(wy, wx) - math.atan2(
                self.l2 * math.sin(elbow), self.l1 + self.l2 * math.cos(elbow)
            )
            q1 = wrap_near(q1, current[0])
            q2 = wrap_near(elbow, current[1])
            q3 = wrap_near(theta - q1 - q2, current[2])
            candidate = np.array([q1, q2, q3])
            distance = float(np.linalg.norm(candidate - current))
            if distance < best_distance:
                best, best_distance = candidate, distance
        return best


def fk(model: RobotModel, q: t.Optional[t.Sequence[float]] = None) -> Pose:
    """End-effector pose at ``q`` (the model's actual configuration when omitted)."""
    return model.forward(model.q if q is None else np.asarray(q, dtype=np.float64))


def ik(model: RobotModel, x_c: Pose) -> t.Optional[Vector]:
    return model.inverse(x_c)
