"""Training console: intercepts run lifecycle events and persists them."""
from __future__ import annotations

import logging
import typing as t

if t.TYPE_CHECKING:
    from compliant_rl.emitter import MetricsEmitter
    from compliant_rl.env import EpisodeRecord
    from compliant_rl.safety import SafetyStats
    from compliant_rl.sac import SACAgent

logger = logging.getLogger(__name__)


class LogProgress:
    """Default progress sink: a log line every ``every`` episodes."""

    def __init__(self, every: int = 10):
        self.every = every
        self._rewards: t.List[float] = []

    def start_run(self, run_name: str, total_steps: int) -> None:
        logger.info(f"Starting run {run_name} for {total_steps} steps")

    def update_episode(self, episode: int, record: "EpisodeRecord", global_step: int) -> None:
        self._rewards.append(record.cumulative_reward)
        if (episode + 1) % self.every == 0:
            recent = self._rewards[-self.every :]
            logger.info(
                f"Episode {episode + 1} step {global_step}: "
                f"mean reward {sum(recent) / len(recent):.2f} over last {len(recent)}"
            )

    def update_checkpoint(self, global_step: int) -> None:
        logger.info(f"Checkpoint at step {global_step}")

    def stop_run(self, success: bool, global_step: int) -> None:
        state = "finished" if success else "failed"
        logger.info(f"Run {state} at step {global_step}")


class TrainingConsole:
    """Progress wrapper that writes metrics for every lifecycle event.

    The wrapper uses delegation (not inheritance): it intercepts the episode,
    checkpoint and run events to persist them through the emitter, then
    forwards each event, and anything else, to the wrapped progress sink.
    """

    def __init__(
        self,
        emitter: "MetricsEmitter",
        stats: "SafetyStats",
        wrapped: t.Optional[t.Any] = None,
    ):
        self._wrapped = wrapped if wrapped is not None else LogProgress()
        self._emitter = emitter
        self._stats = stats
        self._episodes = 0
        self._terminations: t.Dict[str, int] = {}
        self._successes: t.List[bool] = []

    def __getattr__(self, name: str) -> t.Any:
        """Delegate all other methods to the wrapped sink."""
        return getattr(self._wrapped, name)

    @property
    def episodes(self) -> int:
        return self._episodes

    @property
    def terminations(self) -> t.Dict[str, int]:
        return dict(self._terminations)

    def success_rate(self, last: int = 20) -> float:
        recent = self._successes[-last:]
        return sum(recent) / len(recent) if recent else 0.0

    def start_run(self, run_name: str, total_steps: int) -> None:
        self._emitter.start()
        self._wrapped.start_run(run_name, total_steps)

    def update_episode(self, record: "EpisodeRecord", global_step: int) -> None:
        """Called when an episode ends (or is cut by the step budget)."""
        from compliant_rl.emitter import MetricsRow

        cause = record.termination.value if record.termination is not None else "budget"
        self._emitter.emit_episode(
            MetricsRow(
                episode=self._episodes,
                global_step=global_step,
                cumulative_reward=record.cumulative_reward,
                steps=record.steps,
                termination=cause,
                collisions=self._stats.collisions,
                holds_no_ik=self._stats.holds_no_ik,
                holds_velocity=self._stats.holds_velocity,
            )
        )
        self._terminations[cause] = self._terminations.get(cause, 0) + 1
        self._successes.append(cause == "success")
        self._wrapped.update_episode(self._episodes, record, global_step)
        self._episodes += 1

    def update_checkpoint(
        self, agent: "SACAgent", global_step: int, name: t.Optional[str] = None
    ) -> None:
        self._emitter.emit_checkpoint(agent, global_step, name)
        self._wrapped.update_checkpoint(global_step)

    def stop_run(self, success: bool, global_step: int, summary: t.Mapping[str, t.Any]) -> None:
        self._emitter.emit_summary(summary)
        self._wrapped.stop_run(success, global_step)
