"""Seeded training runs and checkpoint evaluation."""
from __future__ import annotations

import logging
import math
import typing as t
from dataclasses import dataclass, field
from pathlib import Path

import gymnasium as gym
import numpy as np

from compliant_rl.buffer import ReplayBuffer, Transition
from compliant_rl.config import RunConfig, build_agent, build_env, config_hash, dump_config
from compliant_rl.console import LogProgress, TrainingConsole
from compliant_rl.emitter import MetricsEmitter
from compliant_rl.env import EpisodeRecord, Termination
from compliant_rl.safety import SafetyStats
from compliant_rl.sac import NonFiniteLossError, SACAgent, load_checkpoint

logger = logging.getLogger(__name__)

SUCCESS_WINDOW = 20


class EpisodeSink(t.Protocol):
    def __call__(self, record: t.Any, global_step: int) -> None:
        ...


@dataclass
class LoopState:
    global_step: int = 0
    episodes: int = 0
    returns: t.List[float] = field(default_factory=list)


def run_name(cfg: RunConfig) -> str:
    penalty = "pen" if cfg.reward.penalize_collisions else "nopen"
    return f"{cfg.model}-{penalty}-seed{cfg.seed}"


def spawn_seeds(seed: int) -> t.Tuple[int, np.random.Generator, np.random.Generator]:
    """Independent streams for the environment, the agent and the replay sampler."""
    env_seq, agent_seq, buffer_seq = np.random.SeedSequence(seed).spawn(3)
    env_seed = int(env_seq.generate_state(1)[0])
    return env_seed, np.random.default_rng(agent_seq), np.random.default_rng(buffer_seq)


def training_loop(
    env: gym.Env,  # type: ignore[type-arg]
    agent: SACAgent,
    buffer: ReplayBuffer,
    total_steps: int,
    warmup_steps: int,
    env_seed: int,
    on_episode: EpisodeSink,
    on_step: t.Optional[t.Callable[[int], None]] = None,
) -> LoopState:
    """Interleave environment steps and SAC updates for ``total_steps`` steps.

    Actions are uniform during warm-up. ``on_episode`` receives each finished
    episode's record (the env's ``info["record"]`` when present, else the
    return) and is called once more for an episode cut by the step budget.
    """
    state = LoopState()
    obs, _ = env.reset(seed=env_seed)
    episode_return = 0.0
    episode_steps = 0
    info: t.Dict[str, t.Any] = {}
    batch_size = agent.config.batch_size
    for step in range(1, total_steps + 1):
        if step <= warmup_steps:
            action = agent.rng.uniform(-1.0, 1.0, size=agent.act_dim)
        else:
            action = agent.act(obs)
        next_obs, reward, terminated, truncated, info = env.step(action)
        buffer.store(Transition(obs, action, float(reward), next_obs, bool(terminated)))
        obs = next_obs
        episode_return += float(reward)
        episode_steps += 1
        state.global_step = step

        if step > warmup_steps and len(buffer) >= batch_size:
            agent.update(buffer.sample_batch(batch_size))
        if on_step is not None:
            on_step(step)

        if terminated or truncated:
            on_episode(info.get("record", episode_return), step)
            state.returns.append(episode_return)
            state.episodes += 1
            episode_return, episode_steps = 0.0, 0
            obs, _ = env.reset()

    if episode_steps > 0:
        record = info.get("record")
        if isinstance(record, EpisodeRecord):
            record.termination = None
        on_episode(record if record is not None else episode_return, total_steps)
        state.returns.append(episode_return)
        state.episodes += 1
    return state


@dataclass
class RunResult:
    run_dir: Path
    global_step: int
    episodes: int
    summary: t.Dict[str, t.Any]


def build_summary(
    cfg: RunConfig,
    console: TrainingConsole,
    stats: SafetyStats,
    global_step: int,
    policy_period: float,
    status: str,
) -> t.Dict[str, t.Any]:
    return {
        "status": status,
        "seed": cfg.seed,
        "model": cfg.model,
        "penalize_collisions": cfg.reward.penalize_collisions,
        "config_hash": config_hash(cfg),
        "global_step": global_step,
        "episodes": console.episodes,
        "simulated_seconds": round(global_step * policy_period, 6),
        f"success_rate_last_{SUCCESS_WINDOW}": console.success_rate(SUCCESS_WINDOW),
        "safety": stats.as_dict(),
        "terminations": dict(sorted(console.terminations.items())),
    }


def train(
    cfg: RunConfig,
    run_dir: t.Union[str, Path],
    progress: t.Optional[t.Any] = None,
) -> RunResult:
    """Execute one seeded training run and write its artifacts into ``run_dir``.

    Raises:
        NonFiniteLossError: after saving ``checkpoints/diverged.npz`` and a
            failed summary.
    """
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, run_dir / "config.yaml")

    stats = SafetyStats()
    env = build_env(cfg, stats)
    env_seed, agent_rng, buffer_rng = spawn_seeds(cfg.seed)
    obs_dim = int(env.observation_space.shape[0])
    act_dim = int(env.action_space.shape[0])
    agent = build_agent(cfg, obs_dim, act_dim, agent_rng)
    buffer = ReplayBuffer(cfg.sac.buffer_capacity, obs_dim, act_dim, buffer_rng)

    emitter = MetricsEmitter(run_dir, config_hash(cfg))
    console = TrainingConsole(
        emitter, stats, progress or LogProgress(cfg.training.log_every_episodes)
    )
    console.start_run(run_name(cfg), cfg.training.total_steps)

    every = cfg.training.checkpoint_every
    last_step = 0

    def on_step(step: int) -> None:
        nonlocal last_step
        last_step = step
        if step % every == 0:
            console.update_checkpoint(agent, step)

    try:
        state = training_loop(
            env,
            agent,
            buffer,
            cfg.training.total_steps,
            cfg.sac.warmup_steps,
            env_seed,
            on_episode=console.update_episode,
            on_step=on_step,
        )
    except NonFiniteLossError:
        logger.error(f"Run {run_name(cfg)} diverged at step {last_step}", exc_info=True)
        console.update_checkpoint(agent, last_step, "diverged")
        summary = build_summary(cfg, console, stats, last_step, env.policy_period, "diverged")
        console.stop_run(False, last_step, summary)
        raise

    console.update_checkpoint(agent, state.global_step, "final")
    summary = build_summary(cfg, console, stats, state.global_step, env.policy_period, "finished")
    console.stop_run(True, state.global_step, summary)
    return RunResult(run_dir, state.global_step, state.episodes, summary)


@dataclass
class EvalReport:
    episodes: int
    successes: int = 0
    collisions: int = 0
    mean_steps_to_success: t.Optional[float] = None
    mean_reward: t.Optional[float] = None
    policy: str = "checkpoint"

    @property
    def success_rate(self) -> t.Optional[float]:
        return self.successes / self.episodes if self.episodes else None

    def as_dict(self) -> t.Dict[str, t.Any]:
        return {
            "policy": self.policy,
            "episodes": self.episodes,
            "successes": self.successes,
            "success_rate": self.success_rate,
            "collisions": self.collisions,
            "mean_steps_to_success": self.mean_steps_to_success,
            "mean_reward": self.mean_reward,
        }


def evaluate(
    cfg: RunConfig,
    episodes: int,
    checkpoint: t.Optional[t.Union[str, Path]] = None,
    seed: t.Optional[int] = None,
) -> EvalReport:
    """Run deterministic episodes with a checkpoint's mean action.

    Without a checkpoint the zero action is used, which leaves the nominal
    controller at its base gains driving straight at the goal.

    Raises:
        CheckpointMismatchError: when the checkpoint was trained on another
            environment configuration.
    """
    policy = "checkpoint" if checkpoint is not None else "nominal"
    if episodes <= 0:
        return EvalReport(episodes=0, policy=policy)

    env = build_env(cfg)
    act_dim = int(env.action_space.shape[0])
    agent: t.Optional[SACAgent] = None
    if checkpoint is not None:
        ckpt = load_checkpoint(checkpoint, expected_hash=config_hash(cfg))
        obs_dim = int(env.observation_space.shape[0])
        agent = build_agent(cfg, obs_dim, act_dim, np.random.default_rng(0))
        ckpt.restore(agent)

    report = EvalReport(episodes=episodes, policy=policy)
    success_steps: t.List[int] = []
    rewards: t.List[float] = []
    obs, _ = env.reset(seed=cfg.seed if seed is None else seed)
    for _ in range(episodes):
        done = False
        while not done:
            action = agent.act(obs, deterministic=True) if agent is not None else np.zeros(act_dim)
            obs, _, terminated, truncated, info = env.step(action)
            done = terminated or truncated
        record: EpisodeRecord = info["record"]
        rewards.append(record.cumulative_reward)
        if record.termination is Termination.SUCCESS:
            report.successes += 1
            success_steps.append(record.steps)
        elif record.collision:
            report.collisions += 1
        obs, _ = env.reset()
    report.mean_steps_to_success = float(np.mean(success_steps)) if success_steps else None
    report.mean_reward = float(np.mean(rewards))
    if not math.isfinite(report.mean_reward):
        logger.warning(f"Non-finite mean reward over {episodes} evaluation episodes")
    return report
