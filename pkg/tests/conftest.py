"""Test fixtures for compliant-rl."""
from __future__ import annotations

import numpy as np
import pytest
from unittest.mock import MagicMock


@pytest.fixture
def rng():
    """A fixed-seed generator."""
    return np.random.default_rng(1234)


@pytest.fixture
def free_flyer():
    """Free-flyer with no actuator lag and generous joint speed limits."""
    from compliant_rl.robots import FreeFlyer

    robot = FreeFlyer([0.5] * 3 + [2.0] * 3)
    robot.reset(np.zeros(6))
    return robot


@pytest.fixture
def planar_arm():
    """Planar 3R arm mounted in the world x-z plane, elbow reference set."""
    from compliant_rl.geometry import Pose, Quaternion
    from compliant_rl.robots import Planar3R

    base = Pose(np.array([-0.4, 0.0, 0.25]), Quaternion.from_axis_angle((1, 0, 0), np.pi / 2))
    robot = Planar3R((0.3, 0.3, 0.1), (3.0, 3.0, 3.0), base=base)
    robot.reset([0.0, -0.5, 0.5])
    return robot


@pytest.fixture
def small_config():
    """Default run config shrunk for fast tests."""
    from compliant_rl.config import load_config

    return load_config(
        None,
        [
            "training.total_steps=60",
            "training.checkpoint_every=30",
            "training.log_every_episodes=1",
            "sac.warmup_steps=20",
            "sac.batch_size=8",
            "sac.hidden_sizes=[8, 8]",
            "sac.buffer_capacity=200",
            "task.max_steps=10",
        ],
    )


@pytest.fixture
def mock_emitter():
    """Create a mock metrics emitter."""
    return MagicMock()


@pytest.fixture
def mock_progress():
    """Create a mock progress sink."""
    return MagicMock()


@pytest.fixture
def reset_settings(monkeypatch):
    """Forget process-wide settings and detach handlers added during the test."""
    import logging

    from compliant_rl import settings

    monkeypatch.setattr(settings, "_configured", False)
    monkeypatch.setattr(settings, "_output_root", None)
    monkeypatch.delenv(settings.OUTPUT_ROOT_ENV, raising=False)
    monkeypatch.delenv(settings.LOG_LEVEL_ENV, raising=False)
    package_logger = logging.getLogger("compliant_rl")
    handlers = list(package_logger.handlers)
    level = package_logger.level
    yield settings
    package_logger.handlers[:] = handlers
    package_logger.setLevel(level)
