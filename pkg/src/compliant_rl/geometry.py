"""Pose algebra, quaternion orientation error, filtering and affine gain mapping.

Vectors are 6-component task-space arrays ordered ``[x, y, z, rx, ry, rz]``.
Quaternions are stored as a scalar part ``eta`` and a vector part ``eps``.
"""
from __future__ import annotations

import math
import typing as t
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

Vector = npt.NDArray[np.float64]

UNIT_TOLERANCE = 1e-6


def as_vector(values: t.Any, size: int, name: str = "vector") -> Vector:
    """Copy ``values`` into a read-only float vector of length ``size``."""
    arr = np.array(values, dtype=np.float64).reshape(-1)
    if arr.shape != (size,):
        raise ValueError(f"{name} must have {size} components, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite, got {arr}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Quaternion:
    """Unit quaternion (Euler parameters) ``{eta, eps}``."""

    eta: float
    eps: Vector

    def __post_init__(self) -> None:
        object.__setattr__(self, "eta", float(self.eta))
        object.__setattr__(self, "eps", as_vector(self.eps, 3, "quaternion vector part"))

    @classmethod
    def identity(cls) -> Quaternion:
        return cls(1.0, np.zeros(3))

    @classmethod
    def from_array(cls, wxyz: t.Sequence[float]) -> Quaternion:
        arr = np.asarray(wxyz, dtype=np.float64)
        if arr.shape != (4,):
            raise ValueError(f"quaternion must have 4 components, got shape {arr.shape}")
        return cls(float(arr[0]), arr[1:])

    @classmethod
    def from_axis_angle(cls, axis: t.Sequence[float], angle: float) -> Quaternion:
        ax = np.asarray(axis, dtype=np.float64)
        n = float(np.linalg.norm(ax))
        if n < 1e-12:
            raise ValueError("rotation axis must be non-zero")
        return cls(math.cos(angle / 2.0), ax / n * math.sin(angle / 2.0))

    @classmethod
    def from_rotation_vector(cls, rotvec: t.Sequence[float]) -> Quaternion:
        """Exponential map of a rotation vector (axis * angle)."""
        v = np.asarray(rotvec, dtype=np.float64)
        theta = float(np.linalg.norm(v))
        if theta < 1e-8:
            # second-order expansion keeps the result unit to machine precision
            q = cls(1.0 - theta * theta / 8.0, 0.5 * v)
            return q.normalized()
        return cls(math.cos(theta / 2.0), v / theta * math.sin(theta / 2.0))

    def as_array(self) -> Vector:
        return np.concatenate([[self.eta], self.eps])

    def norm(self) -> float:
        return float(np.linalg.norm(self.as_array()))

    def is_unit(self, tol: float = UNIT_TOLERANCE) -> bool:
        return abs(self.norm() - 1.0) <= tol

    def canonical(self) -> Quaternion:
        """Representative of the same rotation with ``eta >= 0``."""
        if self.eta < 0.0:
            return Quaternion(-self.eta, -self.eps)
        return self

    def normalized(self) -> Quaternion:
        n = self.norm()
        if n < 1e-12:
            raise ValueError("cannot normalize a zero quaternion")
        return Quaternion(self.eta / n, self.eps / n).canonical()

    def conjugate(self) -> Quaternion:
        return Quaternion(self.eta, -self.eps)

    def multiply(self, other: Quaternion) -> Quaternion:
        """Hamilton product ``self ⊗ other``."""
        eta = self.eta * other.eta - float(np.dot(self.eps, other.eps))
        eps = self.eta * other.eps + other.eta * self.eps + np.cross(self.eps, other.eps)
        return Quaternion(eta, eps)

    def as_rotation_vector(self) -> Vector:
        """Logarithmic map, angle in [0, pi]."""
        q = self.normalized()
        s = float(np.linalg.norm(q.eps))
        if s < 1e-12:
            return 2.0 * q.eps
        angle = 2.0 * math.atan2(s, q.eta)
        return q.eps / s * angle

    def as_matrix(self) -> npt.NDArray[np.float64]:
        w = self.eta
        x, y, z = self.eps
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
                [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
                [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
            ]
        )

    def rotate(self, v: t.Sequence[float]) -> Vector:
        return t.cast(Vector, self.as_matrix() @ np.asarray(v, dtype=np.float64))


@dataclass(frozen=True, eq=False)
class Pose:
    """Task-space pose ``x = [p, phi]``."""

    p: Vector
    phi: Quaternion = field(default_factory=Quaternion.identity)

    def __post_init__(self) -> None:
        object.__setattr__(self, "p", as_vector(self.p, 3, "position"))
        if not self.phi.is_unit():
            raise ValueError(f"pose orientation must be a unit quaternion (norm {self.phi.norm()})")

    @classmethod
    def identity(cls) -> Pose:
        return cls(np.zeros(3))

    def moved(self, delta: t.Sequence[float]) -> Pose:
        """Apply a 6-vector increment: translation plus world-frame rotation vector."""
        d = np.asarray(delta, dtype=np.float64)
        rot = Quaternion.from_rotation_vector(d[3:])
        return Pose(self.p + d[:3], rot.multiply(self.phi).normalized())

    def as_array(self) -> Vector:
        """Position followed by the rotation vector of the orientation."""
        return np.concatenate([self.p, self.phi.as_rotation_vector()])


@dataclass(frozen=True, eq=False)
class Twist:
    linear: Vector
    angular: Vector

    def __post_init__(self) -> None:
        object.__setattr__(self, "linear", as_vector(self.linear, 3, "linear velocity"))
        object.__setattr__(self, "angular", as_vector(self.angular, 3, "angular velocity"))

    @classmethod
    def zero(cls) -> Twist:
        return cls(np.zeros(3), np.zeros(3))

    @classmethod
    def from_array(cls, values: t.Sequence[float]) -> Twist:
        v = as_vector(values, 6, "twist")
        return cls(v[:3], v[3:])

    def as_array(self) -> Vector:
        return np.concatenate([self.linear, self.angular])


@dataclass(frozen=True, eq=False)
class Wrench:
    force: Vector
    torque: Vector

    def __post_init__(self) -> None:
        object.__setattr__(self, "force", as_vector(self.force, 3, "force"))
        object.__setattr__(self, "torque", as_vector(self.torque, 3, "torque"))

    @classmethod
    def zero(cls) -> Wrench:
        return cls(np.zeros(3), np.zeros(3))

    @classmethod
    def from_array(cls, values: t.Sequence[float]) -> Wrench:
        v = as_vector(values, 6, "wrench")
        return cls(v[:3], v[3:])

    def as_array(self) -> Vector:
        return np.concatenate([self.force, self.torque])


def _require_unit(q: Quaternion, name: str) -> None:
    if not q.is_unit():
        raise ValueError(f"{name} must be a unit quaternion, norm is {q.norm():.9f}")


def orientation_error(goal: Quaternion, current: Quaternion) -> Vector:
    """Orientation error of ``current`` with respect to ``goal`` as axis * angle.

    The direction is the unit-quaternion error
    ``e = eta_c*eps_g - eta_g*eps_c - eps_g x eps_c`` (vector part of
    ``goal ⊗ current*``); its length is rescaled from ``sin(angle/2)`` to the
    relative rotation angle so the result equals the log map of
    ``R_goal R_current^T``.
    """
    _require_unit(goal, "goal orientation")
    _require_unit(current, "current orientation")
    e = current.eta * goal.eps - goal.eta * current.eps - np.cross(goal.eps, current.eps)
    eta_rel = goal.eta * current.eta + float(np.dot(goal.eps, current.eps))
    if eta_rel < 0.0:
        # double cover: pick the short way round
        e = -e
        eta_rel = -eta_rel
    s = float(np.linalg.norm(e))
    if s < 1e-12:
        return np.zeros(3) if s == 0.0 else 2.0 * e
    angle = 2.0 * math.atan2(s, eta_rel)
    return t.cast(Vector, e / s * angle)


def pose_error(goal: Pose, current: Pose) -> Vector:
    """``x_e = x_g - x`` with the orientation part from :func:`orientation_error`."""
    return np.concatenate([goal.p - current.p, orientation_error(goal.phi, current.phi)])


def alpha_from_cutoff(cutoff_hz: float, period: float) -> float:
    """First-order smoothing coefficient ``2*pi*fc*T / (1 + 2*pi*fc*T)``."""
    if cutoff_hz <= 0.0 or period <= 0.0:
        raise ValueError(f"cutoff and period must be positive, got {cutoff_hz}, {period}")
    wc = 2.0 * math.pi * cutoff_hz * period
    return wc / (1.0 + wc)


@dataclass
class LowPassFilter:
    """First-order exponential filter with unit DC gain."""

    alpha: float
    state: Vector = field(default_factory=lambda: np.zeros(6))

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        self.state = np.array(self.state, dtype=np.float64)

    @classmethod
    def from_cutoff(cls, cutoff_hz: float, period: float, size: int = 6) -> LowPassFilter:
        return cls(alpha_from_cutoff(cutoff_hz, period), np.zeros(size))

    def reset(self, value: t.Optional[Vector] = None) -> None:
        self.state = np.zeros_like(self.state) if value is None else np.array(value, dtype=float)

    def step(self, sample: Vector) -> Vector:
        return lowpass_step(self, sample)


def lowpass_step(filt: LowPassFilter, sample: t.Sequence[float]) -> Vector:
    """Advance ``filt`` by one sample and return the new state (a copy)."""
    filt.state = (1.0 - filt.alpha) * filt.state + filt.alpha * np.asarray(sample, dtype=float)
    return filt.state.copy()


def map_range(a: float, base: float, range_: float) -> float:
    """Map an action in [-1, 1] onto ``[base - range, base + range]``."""
    if range_ < 0.0:
        raise ValueError(f"range must be non-negative, got {range_}")
    a = min(1.0, max(-1.0, float(a)))
    return base + a * range_
