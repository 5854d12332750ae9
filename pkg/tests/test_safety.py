"""Tests for the safety gate."""
from __future__ import annotations

import numpy as np
import pytest


def _limits(qdot=0.5, force=20.0, torque=2.0):
    from compliant_rl.safety import SafetyLimits

    return SafetyLimits.from_force_torque([qdot] * 3 + [2.0] * 3, force, torque)


class TestGate:
    """Tests for gate verdicts."""

    def test_execute(self, free_flyer):
        """A small reachable command passes."""
        from compliant_rl.geometry import Pose, Wrench
        from compliant_rl.safety import GateVerdict, gate

        result = gate(_limits(), free_flyer, Pose(np.array([0.0005, 0, 0])), Wrench.zero(), 0.002)
        assert result.verdict is GateVerdict.EXECUTE
        np.testing.assert_allclose(result.q_c[:3], [0.0005, 0, 0])

    def test_velocity_hold(self, free_flyer):
        """0.01 m in 2 ms is 5 m/s against a 0.5 m/s limit."""
        from compliant_rl.geometry import Pose, Wrench
        from compliant_rl.safety import GateVerdict, gate

        result = gate(_limits(), free_flyer, Pose(np.array([0.01, 0, 0])), Wrench.zero(), 0.002)
        assert result.verdict is GateVerdict.HOLD_VELOCITY
        assert result.q_c is None

    def test_no_ik_hold(self, free_flyer):
        """Unreachable targets hold."""
        from compliant_rl.geometry import Pose, Wrench
        from compliant_rl.safety import GateVerdict, gate

        result = gate(_limits(), free_flyer, Pose(np.array([1.0, 0, 0])), Wrench.zero(), 0.002)
        assert result.verdict is GateVerdict.HOLD_NO_IK

    def test_force_abort(self, free_flyer):
        """25 N against a 20 N limit aborts."""
        from compliant_rl.geometry import Pose, Wrench
        from compliant_rl.safety import GateVerdict, gate

        wrench = Wrench.from_array([0, 0, 25.0, 0, 0, 0])
        result = gate(_limits(), free_flyer, Pose(np.zeros(3)), wrench, 0.002)
        assert result.verdict is GateVerdict.ABORT_FORCE

    @pytest.mark.parametrize("target", [[1.0, 0.0, 0.0], [0.01, 0.0, 0.0]])
    def test_force_is_checked_before_holds(self, free_flyer, target):
        """An over-limit force aborts even for commands that would be held."""
        from compliant_rl.geometry import Pose, Wrench
        from compliant_rl.safety import GateVerdict, gate

        wrench = Wrench.from_array([0, 0, 25.0, 0, 0, 0])
        result = gate(_limits(), free_flyer, Pose(np.array(target)), wrench, 0.002)
        assert result.verdict is GateVerdict.ABORT_FORCE

    def test_force_at_limit_is_not_collision(self):
        """The limit itself is allowed; only strictly greater aborts."""
        from compliant_rl.geometry import Wrench
        from compliant_rl.safety import is_collision

        assert not is_collision(_limits(), Wrench.from_array([0, 0, 20.0, 0, 0, 0]))
        assert is_collision(_limits(), Wrench.from_array([0, 0, 0, 0, -2.5, 0]))

    def test_gate_does_not_touch_robot(self, free_flyer):
        """Every verdict leaves the robot state bitwise unchanged."""
        from compliant_rl.geometry import Pose, Wrench
        from compliant_rl.safety import gate

        q, q_cmd = free_flyer.q.copy(), free_flyer.q_command.copy()
        for target in ([0.0005, 0, 0], [0.01, 0, 0], [1.0, 0, 0]):
            gate(_limits(), free_flyer, Pose(np.array(target)), Wrench.zero(), 0.002)
        np.testing.assert_array_equal(free_flyer.q, q)
        np.testing.assert_array_equal(free_flyer.q_command, q_cmd)

    def test_stats_recorded(self, free_flyer):
        """Hold counters follow the verdicts."""
        from compliant_rl.geometry import Pose, Wrench
        from compliant_rl.safety import SafetyStats, gate

        stats = SafetyStats()
        gate(_limits(), free_flyer, Pose(np.array([0.01, 0, 0])), Wrench.zero(), 0.002, stats)
        gate(_limits(), free_flyer, Pose(np.array([1.0, 0, 0])), Wrench.zero(), 0.002, stats)
        gate(_limits(), free_flyer, Pose(np.zeros(3)), Wrench.zero(), 0.002, stats)
        assert stats.as_dict() == {"holds_no_ik": 1, "holds_velocity": 1, "collisions": 0}
        assert stats.executed == 1

    def test_limits_must_be_positive(self):
        """Zero limits are rejected."""
        from compliant_rl.safety import SafetyLimits

        with pytest.raises(ValueError, match="strictly positive"):
            SafetyLimits(np.zeros(6), np.ones(6))

    def test_verdict_is_hold(self):
        """Only the two proactive verdicts are holds."""
        from compliant_rl.safety import GateVerdict

        assert GateVerdict.HOLD_NO_IK.is_hold
        assert GateVerdict.HOLD_VELOCITY.is_hold
        assert not GateVerdict.EXECUTE.is_hold
        assert not GateVerdict.ABORT_FORCE.is_hold


class TestGateFuzz:
    """Randomized safety properties."""

    @pytest.mark.slow
    def test_executed_deltas_respect_velocity_limit(self):
        """Over 1e5 fuzzed commands no executed joint delta exceeds qdot_max * dt."""
        from compliant_rl.geometry import Pose, Quaternion, Wrench
        from compliant_rl.robots import FreeFlyer
        from compliant_rl.safety import GateVerdict, gate

        rng = np.random.default_rng(11)
        limits = _limits()
        robot = FreeFlyer(limits.qdot_max)
        robot.reset(np.zeros(6))
        dt = 0.002
        for _ in range(100_000):
            target = robot.pose().p + rng.normal(0.0, 0.002, 3)
            rot = Quaternion.from_rotation_vector(rng.normal(0.0, 0.005, 3))
            result = gate(limits, robot, Pose(target, rot), Wrench.zero(), dt)
            if result.verdict is GateVerdict.EXECUTE:
                before = robot.q_command.copy()
                robot.actuate(result.q_c, dt)
                assert np.all(np.abs(robot.q_command - before) <= limits.qdot_max * dt + 1e-12)

    def test_holds_leave_state_unchanged(self, planar_arm):
        """Fuzzed out-of-plane or far targets on the planar arm never move it."""
        from compliant_rl.geometry import Pose, Wrench
        from compliant_rl.safety import GateVerdict, SafetyLimits, gate

        rng = np.random.default_rng(12)
        limits = SafetyLimits(planar_arm.qdot_max, np.array([20.0] * 3 + [2.0] * 3))
        q = planar_arm.q.copy()
        for _ in range(1000):
            target = rng.uniform(-1.5, 1.5, 3)
            result = gate(limits, planar_arm, Pose(target), Wrench.zero(), 0.002)
            assert result.verdict is not GateVerdict.EXECUTE
        np.testing.assert_array_equal(planar_arm.q, q)
