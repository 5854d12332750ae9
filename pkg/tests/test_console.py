"""Tests for TrainingConsole."""
from __future__ import annotations

from unittest.mock import MagicMock


def _record(termination=None, reward=1.5, steps=3):
    from compliant_rl.env import EpisodeRecord

    return EpisodeRecord(cumulative_reward=reward, steps=steps, termination=termination)


class TestTrainingConsole:
    """Tests for TrainingConsole wrapper."""

    def test_init(self, mock_emitter, mock_progress):
        """Test console initialization."""
        from compliant_rl.console import TrainingConsole
        from compliant_rl.safety import SafetyStats

        console = TrainingConsole(mock_emitter, SafetyStats(), wrapped=mock_progress)

        assert console._wrapped is mock_progress
        assert console.episodes == 0
        assert console.terminations == {}

    def test_default_sink(self, mock_emitter):
        """Without a wrapped sink progress goes to the log."""
        from compliant_rl.console import LogProgress, TrainingConsole
        from compliant_rl.safety import SafetyStats

        console = TrainingConsole(mock_emitter, SafetyStats())
        assert isinstance(console._wrapped, LogProgress)

    def test_getattr_delegates(self, mock_emitter, mock_progress):
        """Test that unknown attributes delegate to the wrapped sink."""
        from compliant_rl.console import TrainingConsole
        from compliant_rl.safety import SafetyStats

        mock_progress.some_method = MagicMock(return_value="result")
        console = TrainingConsole(mock_emitter, SafetyStats(), wrapped=mock_progress)

        assert console.some_method() == "result"
        mock_progress.some_method.assert_called_once()

    def test_start_run_starts_emitter(self, mock_emitter, mock_progress):
        """Test that start_run truncates the metrics file and delegates."""
        from compliant_rl.console import TrainingConsole
        from compliant_rl.safety import SafetyStats

        console = TrainingConsole(mock_emitter, SafetyStats(), wrapped=mock_progress)
        console.start_run("P-14-pen-seed0", 100)

        mock_emitter.start.assert_called_once()
        mock_progress.start_run.assert_called_once_with("P-14-pen-seed0", 100)

    def test_update_episode_emits_row(self, mock_emitter, mock_progress):
        """Test that a finished episode becomes one metrics row with running safety counts."""
        from compliant_rl.console import TrainingConsole
        from compliant_rl.env import Termination
        from compliant_rl.safety import SafetyStats

        stats = SafetyStats(holds_no_ik=2, holds_velocity=5, collisions=1)
        console = TrainingConsole(mock_emitter, stats, wrapped=mock_progress)
        record = _record(Termination.COLLISION)
        console.update_episode(record, 42)

        row = mock_emitter.emit_episode.call_args[0][0]
        assert row.episode == 0
        assert row.global_step == 42
        assert row.termination == "collision"
        assert row.collisions == 1
        assert row.holds_velocity == 5
        mock_progress.update_episode.assert_called_once_with(0, record, 42)
        assert console.episodes == 1

    def test_budget_cut_episode(self, mock_emitter, mock_progress):
        """Test that an episode cut by the step budget is labelled budget."""
        from compliant_rl.console import TrainingConsole
        from compliant_rl.safety import SafetyStats

        console = TrainingConsole(mock_emitter, SafetyStats(), wrapped=mock_progress)
        console.update_episode(_record(None), 10)

        assert mock_emitter.emit_episode.call_args[0][0].termination == "budget"
        assert console.terminations == {"budget": 1}

    def test_success_rate(self, mock_emitter, mock_progress):
        """Test the success rate over the most recent episodes."""
        from compliant_rl.console import TrainingConsole
        from compliant_rl.env import Termination
        from compliant_rl.safety import SafetyStats

        console = TrainingConsole(mock_emitter, SafetyStats(), wrapped=mock_progress)
        assert console.success_rate() == 0.0
        outcomes = [Termination.SUCCESS, Termination.TIMEOUT, Termination.SUCCESS]
        for step, outcome in enumerate(outcomes, start=1):
            console.update_episode(_record(outcome), step)

        assert console.success_rate() == 2 / 3
        assert console.success_rate(last=1) == 1.0
        assert console.terminations == {"success": 2, "timeout": 1}

    def test_update_checkpoint(self, mock_emitter, mock_progress):
        """Test that checkpoints are written and reported."""
        from compliant_rl.console import TrainingConsole
        from compliant_rl.safety import SafetyStats

        agent = MagicMock()
        console = TrainingConsole(mock_emitter, SafetyStats(), wrapped=mock_progress)
        console.update_checkpoint(agent, 500, "final")

        mock_emitter.emit_checkpoint.assert_called_once_with(agent, 500, "final")
        mock_progress.update_checkpoint.assert_called_once_with(500)

    def test_stop_run_writes_summary(self, mock_emitter, mock_progress):
        """Test that stop_run writes the summary and delegates."""
        from compliant_rl.console import TrainingConsole
        from compliant_rl.safety import SafetyStats

        console = TrainingConsole(mock_emitter, SafetyStats(), wrapped=mock_progress)
        console.stop_run(False, 7, {"status": "diverged"})

        mock_emitter.emit_summary.assert_called_once_with({"status": "diverged"})
        mock_progress.stop_run.assert_called_once_with(False, 7)


class TestLogProgress:
    """Tests for the logging progress sink."""

    def test_logs_every_n_episodes(self, caplog):
        """A line is logged after every ``every`` episodes."""
        import logging

        from compliant_rl.console import LogProgress

        progress = LogProgress(every=2)
        with caplog.at_level(logging.INFO, logger="compliant_rl.console"):
            for episode in range(4):
                progress.update_episode(episode, _record(reward=float(episode)), episode * 10)

        lines = [r.getMessage() for r in caplog.records if "mean reward" in r.getMessage()]
        assert len(lines) == 2
        assert "mean reward 2.50 over last 2" in lines[1]
