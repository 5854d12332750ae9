"""Soft Actor-Critic on numpy: squashed-Gaussian actor, twin critics, learned temperature.

Loss functions return their gradients explicitly so every piece of the
update can be checked against finite differences.
"""
from __future__ import annotations

import logging
import math
import typing as t
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from compliant_rl.buffer import Batch
from compliant_rl.networks import MLP, Adam, Array

logger = logging.getLogger(__name__)

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
CHECKPOINT_FORMAT_VERSION = 1


class NonFiniteLossError(RuntimeError):
    """A loss or gradient became NaN/inf during an update."""

    def __init__(self, message: str, report: t.Optional[LossReport] = None) -> None:
        super().__init__(message)
        self.report = report


class CheckpointMismatchError(ValueError):
    """Checkpoint does not belong to the configuration it is loaded against."""


@dataclass(frozen=True)
class SACConfig:
    gamma: float = 0.99
    tau: float = 0.005
    actor_lr: float = 3e-4
    critic_lr: float = 3e-4
    alpha_lr: float = 3e-4
    batch_size: int = 256
    initial_alpha: float = 0.2
    target_entropy: t.Optional[float] = None
    hidden_sizes: t.Tuple[int, ...] = (64, 64)

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must be in (0, 1), got {self.gamma}")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError(f"tau must be in (0, 1], got {self.tau}")
        if self.initial_alpha <= 0.0:
            raise ValueError(f"initial alpha must be positive, got {self.initial_alpha}")
        if self.batch_size < 1:
            raise ValueError(f"batch size must be positive, got {self.batch_size}")


@dataclass
class LossReport:
    critic_1: float
    critic_2: float
    actor: float
    alpha_loss: float
    alpha: float
    entropy: float

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in asdict(self).values())


@dataclass
class PolicySample:
    """Everything the actor gradient needs from one reparameterized draw."""

    action: Array
    log_prob: Array
    mean: Array
    log_std: Array
    raw_log_std: Array
    noise: Array
    cache: t.Any = field(repr=False, default=None)


def softplus(x: Array) -> Array:
    return t.cast(Array, np.logaddexp(0.0, x))


def bounded_log_std(raw: Array) -> Array:
    return t.cast(
        Array, LOG_STD_MIN + 0.5 * (LOG_STD_MAX - LOG_STD_MIN) * (np.tanh(raw) + 1.0)
    )


def squash_log_correction(u: Array) -> Array:
    """``log(1 - tanh(u)^2)`` written stably."""
    return t.cast(Array, 2.0 * (math.log(2.0) - u - softplus(-2.0 * u)))


def gaussian_tanh_log_prob(u: Array, mean: Array, log_std: Array) -> Array:
    """Log-density of ``tanh(u)`` for ``u ~ N(mean, exp(log_std)^2)``, per row."""
    z = (u - mean) / np.exp(log_std)
    log_gauss = -0.5 * z**2 - log_std - HALF_LOG_2PI
    return t.cast(Array, (log_gauss - squash_log_correction(u)).sum(axis=-1))


def policy_forward(policy: MLP, obs: Array, noise: Array) -> PolicySample:
    out, cache = policy.forward(obs)
    act_dim = out.shape[1] // 2
    mean, raw = out[:, :act_dim], out[:, act_dim:]
    log_std = bounded_log_std(raw)
    u = mean + np.exp(log_std) * noise
    return PolicySample(
        action=np.tanh(u),
        log_prob=gaussian_tanh_log_prob(u, mean, log_std),
        mean=mean,
        log_std=log_std,
        raw_log_std=raw,
        noise=noise,
        cache=cache,
    )


def sample_action(
    policy: MLP,
    obs: Array,
    rng: t.Optional[np.random.Generator] = None,
    deterministic: bool = False,
) -> t.Tuple[Array, Array]:
    """Draw squashed actions in (-1, 1) with their exact log-density.

    In deterministic mode the noise is zero and the action is ``tanh(mean)``.
    """
    obs2 = np.atleast_2d(obs)
    act_dim = policy.out_dim // 2
    if deterministic:
        noise = np.zeros((obs2.shape[0], act_dim))
    else:
        if rng is None:
            raise ValueError("a random generator is required for stochastic sampling")
        noise = rng.standard_normal((obs2.shape[0], act_dim))
    sample = policy_forward(policy, obs2, noise)
    return sample.action, sample.log_prob


def q_values(critic: MLP, obs: Array, action: Array) -> t.Tuple[Array, t.Any]:
    out, cache = critic.forward(np.concatenate([obs, action], axis=1))
    return out[:, 0], cache


def critic_loss_and_grads(
    critic: MLP, obs: Array, action: Array, target: Array
) -> t.Tuple[float, t.List[Array]]:
    """``0.5 * mean((Q(o, a) - y)^2)`` and its parameter gradients."""
    q, cache = q_values(critic, obs, action)
    diff = q - target
    loss = 0.5 * float(np.mean(diff**2))
    grads, _ = critic.backward(cache, (diff / diff.shape[0])[:, None])
    return loss, grads


def min_q_action_gradient(
    q1: MLP, q2: MLP, obs: Array, action: Array
) -> t.Tuple[Array, Array]:
    """``min(Q1, Q2)`` per row and its gradient with respect to the action."""
    v1, c1 = q_values(q1, obs, action)
    v2, c2 = q_values(q2, obs, action)
    first = (v1 <= v2).astype(np.float64)
    _, g1 = q1.backward(c1, first[:, None])
    _, g2 = q2.backward(c2, (1.0 - first)[:, None])
    obs_dim = obs.shape[1]
    grad = (g1 + g2)[:, obs_dim:]
    return np.minimum(v1, v2), grad


def actor_loss_and_grads(
    policy: MLP, q1: MLP, q2: MLP, obs: Array, noise: Array, alpha: float
) -> t.Tuple[float, t.List[Array], PolicySample]:
    """``mean(alpha * log pi(a|o) - min Q(o, a))`` with ``a`` reparameterized by ``noise``."""
    sample = policy_forward(policy, obs, noise)
    a = sample.action
    n = a.shape[0]
    min_q, g = min_q_action_gradient(q1, q2, obs, a)
    loss = float(np.mean(alpha * sample.log_prob - min_q))

    sigma_xi = np.exp(sample.log_std) * noise
    squash_grad = 1.0 - a**2
    # d log_pi / du = 2a for the tanh correction; u = mean + sigma * xi
    d_mean = (alpha * 2.0 * a - g * squash_grad) / n
    d_log_std = (alpha * (-1.0 + 2.0 * a * sigma_xi) - g * squash_grad * sigma_xi) / n
    d_raw = d_log_std * 0.5 * (LOG_STD_MAX - LOG_STD_MIN) * (
        1.0 - np.tanh(sample.raw_log_std) ** 2
    )
    grads, _ = policy.backward(sample.cache, np.concatenate([d_mean, d_raw], axis=1))
    return loss, grads, sample


def temperature_loss_and_grad(
    log_alpha: float, log_prob: Array, target_entropy: float
) -> t.Tuple[float, float]:
    """``-mean(log_alpha * (log_pi + target_entropy))`` and its derivative."""
    shifted = np.asarray(log_prob) + target_entropy
    return -log_alpha * float(np.mean(shifted)), -float(np.mean(shifted))


def soft_update(target: MLP, online: MLP, tau: float) -> None:
    """Polyak averaging ``target <- (1 - tau) * target + tau * online``."""
    if target.sizes != online.sizes:
        raise ValueError(f"network shapes differ: {target.sizes} vs {online.sizes}")
    for dst, src in zip(target.parameters(), online.parameters()):
        dst *= 1.0 - tau
        dst += tau * src


class SACAgent:
    """Actor, twin critics with targets, temperature and their optimizers."""

    def __init__(
        self, obs_dim: int, act_dim: int, config: SACConfig, rng: np.random.Generator
    ) -> None:
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.config = config
        self.rng = rng
        hidden = list(config.hidden_sizes)
        self.actor = MLP([obs_dim, *hidden, 2 * act_dim], rng)
        self.q1 = MLP([obs_dim + act_dim, *hidden, 1], rng)
        self.q2 = MLP([obs_dim + act_dim, *hidden, 1], rng)
        self.q1_target = self.q1.copy()
        self.q2_target = self.q2.copy()
        self.log_alpha = np.array([math.log(config.initial_alpha)])
        self.target_entropy = (
            float(-act_dim) if config.target_entropy is None else config.target_entropy
        )
        self.actor_opt = Adam(self.actor.parameters(), config.actor_lr)
        self.q1_opt = Adam(self.q1.parameters(), config.critic_lr)
        self.q2_opt = Adam(self.q2.parameters(), config.critic_lr)
        self.alpha_opt = Adam([self.log_alpha], config.alpha_lr)
        self.updates = 0

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha[0]))

    def act(self, obs: Array, deterministic: bool = False) -> Array:
        action, _ = sample_action(self.actor, obs, self.rng, deterministic)
        return t.cast(Array, action[0])

    def critic_targets(self, batch: Batch) -> Array:
        next_action, next_log_prob = sample_action(self.actor, batch.next_obs, self.rng)
        q1_next, _ = q_values(self.q1_target, batch.next_obs, next_action)
        q2_next, _ = q_values(self.q2_target, batch.next_obs, next_action)
        soft_value = np.minimum(q1_next, q2_next) - self.alpha * next_log_prob
        return t.cast(
            Array, batch.reward + self.config.gamma * (1.0 - batch.done) * soft_value
        )

    def update(self, batch: Batch) -> LossReport:
        """One gradient step on both critics, the actor and the temperature."""
        y = self.critic_targets(batch)
        loss_q1, grads_q1 = critic_loss_and_grads(self.q1, batch.obs, batch.action, y)
        loss_q2, grads_q2 = critic_loss_and_grads(self.q2, batch.obs, batch.action, y)

        noise = self.rng.standard_normal((len(batch), self.act_dim))
        loss_pi, grads_pi, sample = actor_loss_and_grads(
            self.actor, self.q1, self.q2, batch.obs, noise, self.alpha
        )
        loss_alpha, grad_alpha = temperature_loss_and_grad(
            float(self.log_alpha[0]), sample.log_prob, self.target_entropy
        )
        report = LossReport(
            critic_1=loss_q1,
            critic_2=loss_q2,
            actor=loss_pi,
            alpha_loss=loss_alpha,
            alpha=self.alpha,
            entropy=-float(np.mean(sample.log_prob)),
        )
        grads_finite = all(
            np.all(np.isfinite(g)) for g in (*grads_q1, *grads_q2, *grads_pi)
        )
        if not report.is_finite() or not grads_finite or not math.isfinite(grad_alpha):
            raise NonFiniteLossError(f"non-finite loss at update {self.updates}: {report}", report)

        self.q1_opt.step(grads_q1)
        self.q2_opt.step(grads_q2)
        self.actor_opt.step(grads_pi)
        self.alpha_opt.step([np.array([grad_alpha])])
        soft_update(self.q1_target, self.q1, self.config.tau)
        soft_update(self.q2_target, self.q2, self.config.tau)
        self.updates += 1
        return report

    def networks(self) -> t.Dict[str, MLP]:
        return {
            "actor": self.actor,
            "q1": self.q1,
            "q2": self.q2,
            "q1_target": self.q1_target,
            "q2_target": self.q2_target,
        }

    def optimizers(self) -> t.Dict[str, Adam]:
        return {
            "actor_opt": self.actor_opt,
            "q1_opt": self.q1_opt,
            "q2_opt": self.q2_opt,
            "alpha_opt": self.alpha_opt,
        }

    def state_dict(self) -> t.Dict[str, Array]:
        state: t.Dict[str, Array] = {}
        for name, net in self.networks().items():
            state.update(net.named_parameters(name))
        state["log_alpha"] = self.log_alpha
        for name, opt in self.optimizers().items():
            state.update(opt.state(name))
        state["updates"] = np.array(self.updates)
        return {k: np.array(v) for k, v in state.items()}

    def load_state_dict(self, state: t.Mapping[str, Array]) -> None:
        for name, net in self.networks().items():
            named = net.named_parameters(name)
            try:
                net.load_parameters([state[key] for key in named])
            except KeyError as e:
                raise CheckpointMismatchError(f"checkpoint is missing {e.args[0]}") from e
        self.log_alpha[...] = state["log_alpha"]
        for name, opt in self.optimizers().items():
            opt.load_state(name, state)
        self.updates = int(state["updates"])


def save_checkpoint(
    path: t.Union[str, Path], agent: SACAgent, config_hash: str, global_step: int
) -> Path:
    """Write all weights, optimizer moments and identifying metadata to ``path`` (.npz)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays = agent.state_dict()
    arrays.update(
        format_version=np.array(CHECKPOINT_FORMAT_VERSION),
        config_hash=np.array(config_hash),
        global_step=np.array(global_step),
        action_dim=np.array(agent.act_dim),
        obs_dim=np.array(agent.obs_dim),
    )
    with path.open("wb") as f:
        np.savez(f, **arrays)
    logger.info(f"Saved checkpoint {path} at step {global_step}")
    return path


@dataclass
class Checkpoint:
    config_hash: str
    global_step: int
    obs_dim: int
    action_dim: int
    arrays: t.Dict[str, Array]

    def restore(self, agent: SACAgent) -> None:
        if (agent.obs_dim, agent.act_dim) != (self.obs_dim, self.action_dim):
            raise CheckpointMismatchError(
                f"checkpoint dims {(self.obs_dim, self.action_dim)} do not match agent "
                f"dims {(agent.obs_dim, agent.act_dim)}"
            )
        agent.load_state_dict(self.arrays)


def load_checkpoint(
    path: t.Union[str, Path], expected_hash: t.Optional[str] = None
) -> Checkpoint:
    with np.load(Path(path), allow_pickle=False) as data:
        arrays = {key: data[key] for key in data.files}
    version = int(arrays.pop("format_version", -1))
    if version != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointMismatchError(f"unsupported checkpoint format version {version}")
    config_hash = str(arrays.pop("config_hash"))
    if expected_hash is not None and config_hash != expected_hash:
        raise CheckpointMismatchError(
            f"checkpoint config hash {config_hash[:12]} does not match {expected_hash[:12]}"
        )
    return Checkpoint(
        config_hash=config_hash,
        global_step=int(arrays.pop("global_step")),
        obs_dim=int(arrays.pop("obs_dim")),
        action_dim=int(arrays.pop("action_dim")),
        arrays=arrays,
    )
