"""Learnable force controllers: parallel position/force control and admittance control.

Both controllers run at the inner (500 Hz) rate and return a task-space
command increment ``dt * u`` that the environment accumulates into the
streamed command pose. The policy modulates their gains once per policy step
through :func:`expand_action` and :func:`apply_gain_actions`.
"""
from __future__ import annotations

import enum
import logging
import math
import typing as t
from dataclasses import dataclass, field

import numpy as np

from compliant_rl.geometry import Vector

logger = logging.getLogger(__name__)

POSE_DIMS = 6
KI_RATIO = 0.01
DEFAULT_INERTIA = 0.1


class Scheme(str, enum.Enum):
    PARALLEL = "parallel"
    ADMITTANCE = "admittance"


# gain group names, in action-vector order
KP_X = "kp_x"
KP_F = "kp_f"
SELECTION = "selection"
STIFFNESS = "stiffness"


@dataclass(frozen=True)
class ActionSpaceModel:
    """One row of the policy-model table: which gains the policy may modulate."""

    name: str
    scheme: Scheme
    groups: t.Tuple[t.Tuple[str, int], ...]

    @property
    def dims(self) -> int:
        return POSE_DIMS + sum(count for _, count in self.groups)


ACTION_SPACE_MODELS: t.Dict[str, ActionSpaceModel] = {
    m.name: m
    for m in (
        ActionSpaceModel("P-9", Scheme.PARALLEL, ((KP_X, 1), (KP_F, 1), (SELECTION, 1))),
        ActionSpaceModel("P-14", Scheme.PARALLEL, ((KP_X, 1), (KP_F, 1), (SELECTION, 6))),
        ActionSpaceModel("P-19", Scheme.PARALLEL, ((KP_X, 6), (KP_F, 6), (SELECTION, 1))),
        ActionSpaceModel("P-24", Scheme.PARALLEL, ((KP_X, 6), (KP_F, 6), (SELECTION, 6))),
        ActionSpaceModel("A-8", Scheme.ADMITTANCE, ((KP_X, 1), (STIFFNESS, 1))),
        ActionSpaceModel("A-13", Scheme.ADMITTANCE, ((KP_X, 1), (STIFFNESS, 6))),
        ActionSpaceModel("A-13pd", Scheme.ADMITTANCE, ((KP_X, 6), (STIFFNESS, 1))),
        ActionSpaceModel("A-18", Scheme.ADMITTANCE, ((KP_X, 6), (STIFFNESS, 6))),
    )
}


def get_action_space(name: str) -> ActionSpaceModel:
    try:
        return ACTION_SPACE_MODELS[name]
    except KeyError:
        known = ", ".join(ACTION_SPACE_MODELS)
        raise ValueError(f"Unknown action space model {name!r}; expected one of {known}") from None


@dataclass
class ExpandedAction:
    a_x: Vector
    gains: t.Dict[str, Vector]


def expand_action(model: ActionSpaceModel, a: t.Sequence[float]) -> ExpandedAction:
    """Split a policy action into the pose part and per-axis gain groups.

    Groups with a single entry are broadcast to all six axes.
    """
    arr = np.clip(np.asarray(a, dtype=np.float64).reshape(-1), -1.0, 1.0)
    if arr.shape[0] != model.dims:
        raise ValueError(
            f"{model.name} expects an action of dimension {model.dims}, got {arr.shape[0]}"
        )
    gains: t.Dict[str, Vector] = {}
    offset = POSE_DIMS
    for group, count in model.groups:
        chunk = arr[offset : offset + count]
        gains[group] = np.full(6, chunk[0]) if count == 1 else chunk.copy()
        offset += count
    return ExpandedAction(a_x=arr[:POSE_DIMS].copy(), gains=gains)


def _six(values: t.Union[float, t.Sequence[float], Vector], name: str) -> Vector:
    arr = np.broadcast_to(np.asarray(values, dtype=np.float64), (6,)).copy()
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite, got {arr}")
    return arr


@dataclass(frozen=True, eq=False)
class GainSchedule:
    """Admissible interval ``[base - range, base + range]`` per axis."""

    base: Vector
    range: Vector

    def __post_init__(self) -> None:
        object.__setattr__(self, "base", _six(self.base, "schedule base"))
        object.__setattr__(self, "range", _six(self.range, "schedule range"))
        if np.any(self.range < 0.0):
            raise ValueError(f"schedule range must be non-negative, got {self.range}")

    def map(self, a: Vector) -> Vector:
        return t.cast(Vector, self.base + np.clip(a, -1.0, 1.0) * self.range)


@dataclass(eq=False)
class SelectionMatrix:
    """Diagonal ``S``; entries clamped into [0, 1]."""

    s: Vector = field(default_factory=lambda: np.ones(6))

    def __post_init__(self) -> None:
        self.s = np.clip(_six(self.s, "selection"), 0.0, 1.0)

    @classmethod
    def from_action(cls, a: Vector) -> SelectionMatrix:
        return cls((np.clip(a, -1.0, 1.0) + 1.0) / 2.0)

    def as_matrix(self) -> Vector:
        return np.diag(self.s)


def critical_kd(kp: Vector) -> Vector:
    return t.cast(Vector, 2.0 * np.sqrt(kp))


def critical_damping(k: Vector, m: Vector, zeta: float) -> Vector:
    return t.cast(Vector, 2.0 * zeta * np.sqrt(k * m))


@dataclass(eq=False)
class ParallelGains:
    """PD-on-position / PI-on-force gains, selection matrix and the force integral."""

    kp_x: Vector
    kp_f: Vector
    s: SelectionMatrix = field(default_factory=SelectionMatrix)
    integral_limit: Vector = field(default_factory=lambda: np.full(6, np.inf))
    kd_x: Vector = field(init=False)
    ki_f: Vector = field(init=False)
    f_integral: Vector = field(init=False)

    def __post_init__(self) -> None:
        self.f_integral = np.zeros(6)
        self.integral_limit = _six(self.integral_limit, "integral limit")
        self.set_gains(self.kp_x, self.kp_f, self.s)

    def set_gains(
        self,
        kp_x: t.Union[float, Vector],
        kp_f: t.Union[float, Vector],
        s: t.Optional[SelectionMatrix] = None,
    ) -> None:
        kp_x = _six(kp_x, "kp_x")
        kp_f = _six(kp_f, "kp_f")
        if np.any(kp_x < 0.0) or np.any(kp_f < 0.0):
            raise ValueError("parallel gains must be non-negative")
        self.kp_x = kp_x
        self.kd_x = critical_kd(kp_x)
        self.kp_f = kp_f
        self.ki_f = KI_RATIO * kp_f
        if s is not None:
            self.s = s

    def reset_state(self) -> None:
        self.f_integral = np.zeros(6)

    def state(self) -> t.Dict[str, Vector]:
        return {"f_integral": self.f_integral.copy()}

    def load_state(self, state: t.Mapping[str, Vector]) -> None:
        self.f_integral = np.array(state["f_integral"], dtype=np.float64)


@dataclass(eq=False)
class AdmittanceParams:
    """Desired inertia/damping/stiffness, the PD gains and the admittance state."""

    k: Vector
    kp_x: Vector
    m: Vector = field(default_factory=lambda: np.full(6, DEFAULT_INERTIA))
    zeta: float = 1.0
    b: t.Optional[Vector] = None
    kd_x: Vector = field(init=False)
    state_x: Vector = field(init=False)
    state_v: Vector = field(init=False)

    def __post_init__(self) -> None:
        self.m = _six(self.m, "inertia")
        if np.any(self.m <= 0.0):
            raise ValueError(f"inertia must be positive, got {self.m}")
        if self.zeta <= 0.0:
            raise ValueError(f"damping ratio must be positive, got {self.zeta}")
        explicit_b = self.b
        self.set_gains(self.k, self.kp_x)
        if explicit_b is not None:
            # explicit damping is only used to exercise the raw mass-damper model
            self.b = _six(explicit_b, "damping")
        self.reset_state()

    def set_gains(self, k: t.Union[float, Vector], kp_x: t.Union[float, Vector]) -> None:
        k = _six(k, "stiffness")
        kp_x = _six(kp_x, "kp_x")
        if np.any(k < 0.0) or np.any(kp_x < 0.0):
            raise ValueError("admittance gains must be non-negative")
        self.k = k
        self.b = critical_damping(k, self.m, self.zeta)
        self.kp_x = kp_x
        self.kd_x = critical_kd(kp_x)

    def reset_state(self) -> None:
        self.state_x = np.zeros(6)
        self.state_v = np.zeros(6)

    def state(self) -> t.Dict[str, Vector]:
        return {"state_x": self.state_x.copy(), "state_v": self.state_v.copy()}

    def load_state(self, state: t.Mapping[str, Vector]) -> None:
        self.state_x = np.array(state["state_x"], dtype=np.float64)
        self.state_v = np.array(state["state_v"], dtype=np.float64)


Gains = t.Union[ParallelGains, AdmittanceParams]


def apply_gain_actions(
    schedules: t.Mapping[str, GainSchedule], a_p: t.Mapping[str, Vector], gains: Gains
) -> Gains:
    """Map gain actions in [-1, 1] onto their schedules and update ``gains`` in place.

    Derived gains (``kd_x``, ``ki_f``, ``b``) are recomputed; integral and
    admittance states are kept.
    """
    if isinstance(gains, ParallelGains):
        gains.set_gains(
            schedules[KP_X].map(a_p[KP_X]),
            schedules[KP_F].map(a_p[KP_F]),
            SelectionMatrix.from_action(a_p[SELECTION]),
        )
    else:
        gains.set_gains(schedules[STIFFNESS].map(a_p[STIFFNESS]), schedules[KP_X].map(a_p[KP_X]))
    return gains


def position_branch(kp_x: Vector, kd_x: Vector, x_e: Vector, xdot_e: Vector) -> Vector:
    """PD action on the pose error."""
    return t.cast(Vector, kp_x * np.asarray(x_e) + kd_x * np.asarray(xdot_e))


def parallel_step(
    gains: ParallelGains,
    x_e: Vector,
    xdot_e: Vector,
    a_x: Vector,
    f_ext: Vector,
    dt: float,
) -> Vector:
    """One inner step of ``u = S(Kp x_e + Kd xdot_e) + a_x + (I - S)(Kp_f F + Ki_f ∫F dt)``.

    Returns ``dt * u``. The force integral used in ``u`` is the value before
    this sample; it is advanced afterwards and clamped to ``integral_limit``.
    """
    f = np.asarray(f_ext, dtype=np.float64)
    s = gains.s.s
    pos = position_branch(gains.kp_x, gains.kd_x, x_e, xdot_e)
    force = gains.kp_f * f + gains.ki_f * gains.f_integral
    u = s * pos + np.asarray(a_x, dtype=np.float64) + (1.0 - s) * force
    gains.f_integral = np.clip(
        gains.f_integral + f * dt, -gains.integral_limit, gains.integral_limit
    )
    return t.cast(Vector, u * dt)


def admittance_step(
    params: AdmittanceParams,
    x_e: Vector,
    xdot_e: Vector,
    a_x: Vector,
    f_ext: Vector,
    dt: float,
    substeps: int = 1,
    velocity_limit: float = math.inf,
) -> t.Tuple[Vector, bool]:
    """One inner step of admittance control on top of the PD nominal trajectory.

    The admittance state follows ``m x'' + b x' + k x = F`` integrated with
    semi-implicit Euler over ``substeps`` equal sub-steps. Returns the
    command increment ``dt * (PD + a_x) + Δx_adm`` and whether the velocity
    guard clamped the state.
    """
    if substeps < 1:
        raise ValueError(f"substeps must be >= 1, got {substeps}")
    f = np.asarray(f_ext, dtype=np.float64)
    x_prev = params.state_x.copy()
    x, v = params.state_x.copy(), params.state_v.copy()
    h = dt / substeps
    saturated = False
    for _ in range(substeps):
        v = v + h * (f - params.b * v - params.k * x) / params.m
        if np.any(np.abs(v) > velocity_limit):
            v = np.clip(v, -velocity_limit, velocity_limit)
            saturated = True
        x = x + h * v
    params.state_x, params.state_v = x, v
    if saturated:
        logger.debug(f"Admittance velocity clamped at {velocity_limit}")
    nominal = position_branch(params.kp_x, params.kd_x, x_e, xdot_e) + np.asarray(a_x)
    return t.cast(Vector, nominal * dt + (x - x_prev)), saturated


def natural_frequency(params: AdmittanceParams) -> Vector:
    return t.cast(Vector, np.sqrt(params.k / params.m))


@dataclass
class ControlOutput:
    increment: Vector
    saturated: bool = False
    state: t.Dict[str, Vector] = field(default_factory=dict)


class ForceController:
    """A force control scheme bound to its gain schedules.

    ``step`` proposes an increment without touching the controller state;
    the state it would reach travels in the output and only becomes current
    through ``commit``, once the command has actually been executed.
    """

    scheme: Scheme
    gains: Gains

    def __init__(self, schedules: t.Mapping[str, GainSchedule]) -> None:
        self.schedules = dict(schedules)

    def apply(self, expanded: ExpandedAction) -> None:
        apply_gain_actions(self.schedules, expanded.gains, self.gains)

    def step(
        self, x_e: Vector, xdot_e: Vector, a_x: Vector, f_ext: Vector, dt: float
    ) -> ControlOutput:
        before = self.gains.state()
        out = self._advance(x_e, xdot_e, a_x, f_ext, dt)
        out.state = self.gains.state()
        self.gains.load_state(before)
        return out

    def commit(self, out: ControlOutput) -> None:
        self.gains.load_state(out.state)

    def _advance(
        self, x_e: Vector, xdot_e: Vector, a_x: Vector, f_ext: Vector, dt: float
    ) -> ControlOutput:
        raise NotImplementedError

    def reset(self) -> None:
        reset_controller_state(self)


class ParallelController(ForceController):
    scheme = Scheme.PARALLEL

    def __init__(
        self,
        schedules: t.Mapping[str, GainSchedule],
        integral_limit: t.Union[float, Vector] = math.inf,
    ) -> None:
        super().__init__(schedules)
        self.gains = ParallelGains(
            kp_x=self.schedules[KP_X].base,
            kp_f=self.schedules[KP_F].base,
            s=SelectionMatrix(np.full(6, 0.5)),
            integral_limit=_six(integral_limit, "integral limit"),
        )

    def _advance(
        self, x_e: Vector, xdot_e: Vector, a_x: Vector, f_ext: Vector, dt: float
    ) -> ControlOutput:
        assert isinstance(self.gains, ParallelGains)
        return ControlOutput(parallel_step(self.gains, x_e, xdot_e, a_x, f_ext, dt))


class AdmittanceController(ForceController):
    scheme = Scheme.ADMITTANCE

    def __init__(
        self,
        schedules: t.Mapping[str, GainSchedule],
        inertia: float = DEFAULT_INERTIA,
        zeta: float = 1.0,
        velocity_limit: float = math.inf,
        substeps: int = 1,
    ) -> None:
        super().__init__(schedules)
        self.velocity_limit = velocity_limit
        self.substeps = substeps
        self.gains = AdmittanceParams(
            k=self.schedules[STIFFNESS].base,
            kp_x=self.schedules[KP_X].base,
            m=np.full(6, inertia),
            zeta=zeta,
        )

    def _advance(
        self, x_e: Vector, xdot_e: Vector, a_x: Vector, f_ext: Vector, dt: float
    ) -> ControlOutput:
        assert isinstance(self.gains, AdmittanceParams)
        inc, saturated = admittance_step(
            self.gains, x_e, xdot_e, a_x, f_ext, dt, self.substeps, self.velocity_limit
        )
        return ControlOutput(inc, saturated)


def reset_controller_state(controller: t.Union[ForceController, Gains]) -> None:
    """Zero the force integral or the admittance state."""
    gains = controller.gains if isinstance(controller, ForceController) else controller
    gains.reset_state()
