"""Tests for seeded training runs and evaluation."""
from __future__ import annotations

import json

import numpy as np
import pandas as pd
import pytest


class TestRunNaming:
    """Tests for run names and seed streams."""

    def test_run_name(self):
        """Names combine model, penalty setting and seed."""
        from compliant_rl.config import load_config
        from compliant_rl.training import run_name

        assert run_name(load_config(None, ["seed=3"])) == "P-14-pen-seed3"
        cfg = load_config(None, ["model=A-13pd", "reward.penalize_collisions=false"])
        assert run_name(cfg) == "A-13pd-nopen-seed0"

    def test_spawn_seeds(self):
        """Streams are reproducible per seed and differ across seeds."""
        from compliant_rl.training import spawn_seeds

        a_env, a_agent, a_buffer = spawn_seeds(4)
        b_env, b_agent, b_buffer = spawn_seeds(4)
        c_env, _, _ = spawn_seeds(5)
        assert a_env == b_env != c_env
        assert a_agent.random() == b_agent.random()
        assert a_buffer.random() == b_buffer.random()
        assert a_agent.random() != a_buffer.random()


class TestTrain:
    """Tests for a complete short run."""

    def test_writes_run_directory(self, small_config, tmp_path):
        """A run leaves config, metrics, checkpoints and a summary behind."""
        from compliant_rl.training import train

        run_dir = tmp_path / "run"
        result = train(small_config, run_dir)

        assert (run_dir / "config.yaml").is_file()
        assert (run_dir / "checkpoints" / "step_30.npz").is_file()
        assert (run_dir / "checkpoints" / "step_60.npz").is_file()
        assert (run_dir / "checkpoints" / "final.npz").is_file()
        assert result.global_step == 60

        metrics = pd.read_csv(run_dir / "metrics.csv")
        assert metrics["global_step"].iloc[-1] == 60
        assert metrics["global_step"].is_monotonic_increasing
        assert metrics["global_step"].is_unique
        assert metrics["episode"].tolist() == list(range(len(metrics)))
        assert result.episodes == len(metrics)

        summary = json.loads((run_dir / "summary.json").read_text())
        assert summary["status"] == "finished"
        assert summary["global_step"] == 60
        assert summary["simulated_seconds"] == pytest.approx(3.0)
        assert summary["episodes"] == len(metrics)
        assert set(summary["safety"]) == {"holds_no_ik", "holds_velocity", "collisions"}
        assert sum(summary["terminations"].values()) == len(metrics)
        assert summary["safety"]["collisions"] == summary["terminations"].get("collision", 0)
        assert int(metrics["collisions"].iloc[-1]) == summary["safety"]["collisions"]

    def test_same_seed_same_metrics(self, small_config, tmp_path):
        """Two runs with the same seed write byte-identical metrics."""
        from compliant_rl.training import train

        train(small_config, tmp_path / "a")
        train(small_config, tmp_path / "b")
        assert (tmp_path / "a" / "metrics.csv").read_bytes() == (
            tmp_path / "b" / "metrics.csv"
        ).read_bytes()

    def test_progress_sink_is_used(self, small_config, tmp_path, mock_progress):
        """A custom progress sink sees start, episodes and stop."""
        from compliant_rl.training import train

        train(small_config, tmp_path, progress=mock_progress)
        mock_progress.start_run.assert_called_once_with("P-14-pen-seed0", 60)
        assert mock_progress.update_episode.call_count >= 6
        mock_progress.stop_run.assert_called_once_with(True, 60)

    def test_divergence_saves_checkpoint(self, small_config, tmp_path, mocker):
        """A non-finite loss saves diverged.npz, a failed summary, and re-raises."""
        from compliant_rl.sac import NonFiniteLossError, SACAgent
        from compliant_rl.training import train

        mocker.patch.object(SACAgent, "update", side_effect=NonFiniteLossError("loss is nan"))
        with pytest.raises(NonFiniteLossError):
            train(small_config, tmp_path)

        assert (tmp_path / "checkpoints" / "diverged.npz").is_file()
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["status"] == "diverged"
        # the first update, at step 21, fails before the step is counted
        assert summary["global_step"] == 20


class TestTrainingLoop:
    """Tests for the step loop on its own."""

    def test_budget_cut_episode_is_reported(self, small_config, rng):
        """The unfinished final episode is reported with the last global step."""
        from compliant_rl.buffer import ReplayBuffer
        from compliant_rl.config import build_agent, build_env
        from compliant_rl.training import training_loop

        env = build_env(small_config)
        agent = build_agent(small_config, 18, 14, rng)
        buffer = ReplayBuffer(100, 18, 14, rng)
        seen = []
        state = training_loop(
            env, agent, buffer, 15, 15, 0, on_episode=lambda rec, step: seen.append(step)
        )

        assert state.global_step == 15
        assert seen[-1] == 15
        assert len(buffer) == 15
        assert state.episodes == len(seen)


class TestEvaluate:
    """Tests for deterministic evaluation."""

    def test_zero_episodes(self, small_config):
        """Zero episodes give an empty report."""
        from compliant_rl.training import evaluate

        report = evaluate(small_config, 0)
        assert report.as_dict()["episodes"] == 0
        assert report.success_rate is None
        assert report.policy == "nominal"

    def test_nominal_policy(self, small_config):
        """The nominal controller finishes every requested episode."""
        from compliant_rl.training import evaluate

        report = evaluate(small_config, 2)
        assert report.episodes == 2
        assert report.successes + report.collisions <= 2
        assert np.isfinite(report.mean_reward)

    def test_checkpoint_is_deterministic(self, small_config, tmp_path):
        """Evaluating a checkpoint twice with one seed gives the same report."""
        from compliant_rl.training import evaluate, train

        train(small_config, tmp_path)
        checkpoint = tmp_path / "checkpoints" / "final.npz"
        first = evaluate(small_config, 2, checkpoint, seed=11)
        second = evaluate(small_config, 2, checkpoint, seed=11)
        assert first.as_dict() == second.as_dict()
        assert first.policy == "checkpoint"

    def test_checkpoint_hash_mismatch(self, small_config, tmp_path):
        """A checkpoint from another environment config is refused."""
        from compliant_rl.config import load_config
        from compliant_rl.sac import CheckpointMismatchError
        from compliant_rl.training import evaluate, train

        train(small_config, tmp_path)
        other = load_config(None, ["world.friction=0.9", "sac.hidden_sizes=[8, 8]"])
        with pytest.raises(CheckpointMismatchError, match="config hash"):
            evaluate(other, 1, tmp_path / "checkpoints" / "final.npz")
