"""Fully connected networks with hand-written backpropagation, and the Adam optimizer."""
from __future__ import annotations

import typing as t
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

Array = npt.NDArray[np.float64]

OUTPUT_INIT_SCALE = 3e-3


@dataclass
class ForwardCache:
    """Layer inputs and hidden activations kept for the backward pass."""

    inputs: t.List[Array]
    activations: t.List[Array]


class MLP:
    """``tanh`` hidden layers and a linear output layer.

    Weights are stored as ``(fan_in, fan_out)`` matrices and inputs are
    batches of row vectors.
    """

    def __init__(self, sizes: t.Sequence[int], rng: np.random.Generator) -> None:
        if len(sizes) < 2 or min(sizes) < 1:
            raise ValueError(f"layer sizes must hold at least two positive entries, got {sizes}")
        self.sizes = tuple(int(s) for s in sizes)
        self.weights: t.List[Array] = []
        self.biases: t.List[Array] = []
        last = len(self.sizes) - 2
        for i, (fan_in, fan_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            limit = OUTPUT_INIT_SCALE if i == last else np.sqrt(6.0 / (fan_in + fan_out))
            self.weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))

    @property
    def in_dim(self) -> int:
        return self.sizes[0]

    @property
    def out_dim(self) -> int:
        return self.sizes[-1]

    def parameters(self) -> t.List[Array]:
        """Weights and biases interleaved per layer; the arrays are live references."""
        params: t.List[Array] = []
        for w, b in zip(self.weights, self.biases):
            params.extend((w, b))
        return params

    def named_parameters(self, prefix: str) -> t.Dict[str, Array]:
        named: t.Dict[str, Array] = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            named[f"{prefix}/W{i}"] = w
            named[f"{prefix}/b{i}"] = b
        return named

    def load_parameters(self, params: t.Sequence[Array]) -> None:
        current = self.parameters()
        if len(params) != len(current):
            raise ValueError(f"expected {len(current)} parameter arrays, got {len(params)}")
        for dst, src in zip(current, params):
            if dst.shape != np.shape(src):
                raise ValueError(f"parameter shape mismatch: {dst.shape} vs {np.shape(src)}")
            dst[...] = src

    def copy(self) -> MLP:
        clone = MLP.__new__(MLP)
        clone.sizes = self.sizes
        clone.weights = [w.copy() for w in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        return clone

    def forward(self, x: Array) -> t.Tuple[Array, ForwardCache]:
        h = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if h.shape[1] != self.in_dim:
            raise ValueError(f"expected input width {self.in_dim}, got {h.shape[1]}")
        cache = ForwardCache([], [])
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            cache.inputs.append(h)
            z = h @ w + b
            if i < last:
                h = np.tanh(z)
                cache.activations.append(h)
            else:
                h = z
        return h, cache

    def __call__(self, x: Array) -> Array:
        return self.forward(x)[0]

    def backward(self, cache: ForwardCache, grad_out: Array) -> t.Tuple[t.List[Array], Array]:
        """Gradients of a scalar loss given ``dL/d(output)``.

        Returns the parameter gradients in :meth:`parameters` order and the
        gradient with respect to the input batch.
        """
        grads: t.List[Array] = []
        delta = np.asarray(grad_out, dtype=np.float64)
        for i in reversed(range(len(self.weights))):
            if i < len(self.weights) - 1:
                delta = delta * (1.0 - cache.activations[i] ** 2)
            grads.append(delta.sum(axis=0))
            grads.append(cache.inputs[i].T @ delta)
            delta = delta @ self.weights[i].T
        grads.reverse()
        return grads, delta


class Adam:
    """Adam over a fixed list of parameter arrays, updated in place."""

    def __init__(
        self,
        params: t.Sequence[Array],
        lr: float,
        betas: t.Tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ) -> None:
        if lr <= 0.0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.m = [np.zeros_like(p) for p in self.params]
        self.v = [np.zeros_like(p) for p in self.params]
        self.t = 0

    def step(self, grads: t.Sequence[Array]) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state(self, prefix: str) -> t.Dict[str, Array]:
        state: t.Dict[str, Array] = {f"{prefix}/step": np.array(self.t)}
        for i, (m, v) in enumerate(zip(self.m, self.v)):
            state[f"{prefix}/m{i}"] = m
            state[f"{prefix}/v{i}"] = v
        return state

    def load_state(self, prefix: str, state: t.Mapping[str, Array]) -> None:
        self.t = int(state[f"{prefix}/step"])
        for i, (m, v) in enumerate(zip(self.m, self.v)):
            m[...] = state[f"{prefix}/m{i}"]
            v[...] = state[f"{prefix}/v{i}"]
