"""Tests for robot kinematics and actuation."""
from __future__ import annotations

import math

import numpy as np
import pytest


class TestFreeFlyer:
    """Tests for the free-flying end effector."""

    def test_round_trip(self, free_flyer):
        """ik(fk(q)) returns q inside the workspace."""
        from compliant_rl.robots import fk, ik

        q = np.array([0.05, -0.02, 0.1, 0.1, -0.2, 0.3])
        np.testing.assert_allclose(ik(free_flyer, fk(free_flyer, q)), q, atol=1e-12)

    def test_outside_workspace(self, free_flyer):
        """Poses outside the box have no IK."""
        from compliant_rl.geometry import Pose
        from compliant_rl.robots import ik

        assert ik(free_flyer, Pose(np.array([0.5, 0.0, 0.0]))) is None

    def test_actuate_without_lag(self, free_flyer):
        """Zero time constant reaches the command in one step."""
        q_c = np.array([0.01, 0, 0, 0, 0, 0])
        free_flyer.actuate(q_c, 0.002)
        np.testing.assert_allclose(free_flyer.q, q_c)
        np.testing.assert_allclose(free_flyer.q_command, q_c)

    def test_actuator_lag(self):
        """With lag the configuration closes 1 - exp(-dt / tau) of the gap."""
        from compliant_rl.robots import FreeFlyer

        robot = FreeFlyer([1.0] * 6, time_constant=0.02)
        robot.reset(np.zeros(6))
        robot.actuate(np.ones(6) * 0.01, 0.002)
        np.testing.assert_allclose(robot.q, 0.01 * (1 - math.exp(-0.1)))

    def test_rejects_bad_limits(self):
        """Joint speed limits must be positive."""
        from compliant_rl.robots import FreeFlyer

        with pytest.raises(ValueError):
            FreeFlyer([0.0] * 6)


class TestPlanar3R:
    """Tests for the planar three-link arm."""

    def test_axis_mask(self, planar_arm):
        """Mounted in the x-z plane: x, z and rotation about y."""
        np.testing.assert_allclose(planar_arm.axis_mask, [1, 0, 1, 0, 1, 0])

    def test_zero_configuration(self):
        """Zero joints stretch the arm along the base x axis with identity orientation."""
        from compliant_rl.robots import Planar3R, fk

        robot = Planar3R()
        pose = fk(robot, [0.0, 0.0, 0.0])
        np.testing.assert_allclose(pose.p, [0.7, 0.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(pose.phi.as_rotation_vector(), np.zeros(3), atol=1e-12)

    def test_quarter_turn(self):
        """A quarter turn of the first joint points the stretched arm along y in its plane."""
        from compliant_rl.robots import Planar3R

        x, y, theta = Planar3R().planar_forward([np.pi / 2, 0.0, 0.0])
        assert x == pytest.approx(0.0, abs=1e-12)
        assert y == pytest.approx(0.7)
        assert theta == pytest.approx(np.pi / 2)

    def test_round_trip(self, planar_arm):
        """ik(fk(q)) reproduces the pose for random reachable configurations."""
        from compliant_rl.robots import fk, ik

        rng = np.random.default_rng(3)
        for _ in range(50):
            q = rng.uniform([-1.0, -2.5, -1.0], [1.0, -0.2, 1.0])
            planar_arm.reset(q + rng.normal(0, 0.05, 3))
            pose = fk(planar_arm, q)
            q_ik = ik(planar_arm, pose)
            assert q_ik is not None
            back = fk(planar_arm, q_ik)
            np.testing.assert_allclose(back.p, pose.p, atol=1e-9)
            np.testing.assert_allclose(
                back.phi.as_rotation_vector(), pose.phi.as_rotation_vector(), atol=1e-9
            )

    def test_picks_nearest_branch(self, planar_arm):
        """IK returns the elbow branch closest to the current command."""
        from compliant_rl.robots import fk, ik

        q = np.array([0.2, -0.8, 0.3])
        planar_arm.reset(q)
        np.testing.assert_allclose(ik(planar_arm, fk(planar_arm, q)), q, atol=1e-9)

    def test_out_of_reach(self, planar_arm):
        """Targets beyond the summed link lengths have no solution."""
        from compliant_rl.geometry import Pose
        from compliant_rl.robots import ik

        assert ik(planar_arm, Pose(np.array([1.0, 0.0, 0.25]))) is None

    def test_off_plane(self, planar_arm):
        """Targets off the arm plane have no solution."""
        from compliant_rl.geometry import Pose
        from compliant_rl.robots import ik

        assert ik(planar_arm, Pose(np.array([0.0, 0.01, 0.0]))) is None

    def test_task_start_reachable(self, planar_arm):
        """The default peg start above the hole is reachable."""
        from compliant_rl.geometry import Pose
        from compliant_rl.robots import ik

        assert ik(planar_arm, Pose(np.array([0.004, 0.0, 0.01]))) is not None


class TestWrapNear:
    """Tests for angle unwrapping."""

    def test_wraps_to_reference(self):
        """Angles are shifted by 2 pi to lie near the reference."""
        from compliant_rl.robots import wrap_near

        assert wrap_near(3.0, -3.0) == pytest.approx(3.0 - 2 * math.pi)
        assert wrap_near(0.5, 0.4) == pytest.approx(0.5)
