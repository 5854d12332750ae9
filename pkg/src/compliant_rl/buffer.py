"""FIFO experience replay with seeded uniform sampling."""
from __future__ import annotations

import typing as t
from dataclasses import dataclass

import numpy as np

from compliant_rl.networks import Array


@dataclass
class Transition:
    obs: Array
    action: Array
    reward: float
    next_obs: Array
    done: bool


@dataclass
class Batch:
    obs: Array
    action: Array
    reward: Array
    next_obs: Array
    done: Array

    def __len__(self) -> int:
        return int(self.reward.shape[0])


class ReplayBuffer:
    """Ring storage of transitions; the oldest entry is overwritten when full."""

    def __init__(
        self, capacity: int, obs_dim: int, act_dim: int, rng: np.random.Generator
    ) -> None:
        if capacity < 1:
            raise ValueError(f"capacity must be positive, got {capacity}")
        self.capacity = capacity
        self.rng = rng
        self.obs = np.zeros((capacity, obs_dim))
        self.action = np.zeros((capacity, act_dim))
        self.reward = np.zeros(capacity)
        self.next_obs = np.zeros((capacity, obs_dim))
        self.done = np.zeros(capacity)
        self.ptr = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def store(self, transition: Transition) -> None:
        action = np.asarray(transition.action, dtype=np.float64)
        if np.any(np.abs(action) > 1.0):
            raise ValueError(f"stored actions must lie in [-1, 1], got {action}")
        values = (transition.obs, action, transition.reward, transition.next_obs)
        if not all(np.all(np.isfinite(v)) for v in values):
            raise ValueError("transition contains non-finite entries")
        i = self.ptr
        self.obs[i] = transition.obs
        self.action[i] = action
        self.reward[i] = transition.reward
        self.next_obs[i] = transition.next_obs
        self.done[i] = float(transition.done)
        self.ptr = (self.ptr + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample_indices(self, batch_size: int) -> Array:
        if self.size == 0:
            raise ValueError("cannot sample from an empty replay buffer")
        return t.cast(Array, self.rng.integers(0, self.size, size=batch_size))

    def sample_batch(self, batch_size: int) -> Batch:
        idx = self.sample_indices(batch_size)
        return Batch(
            obs=self.obs[idx],
            action=self.action[idx],
            reward=self.reward[idx],
            next_obs=self.next_obs[idx],
            done=self.done[idx],
        )

    def oldest(self) -> Transition:
        """The entry that the next store would overwrite once full."""
        if self.size == 0:
            raise ValueError("replay buffer is empty")
        i = self.ptr if self.size == self.capacity else 0
        return Transition(
            self.obs[i].copy(), self.action[i].copy(), float(self.reward[i]),
            self.next_obs[i].copy(), bool(self.done[i]),
        )
