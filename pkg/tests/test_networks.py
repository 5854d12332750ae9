"""Tests for the MLP, its backward pass and Adam."""
from __future__ import annotations

import numpy as np
import pytest


def numeric_gradient(f, params, eps=1e-6):
    """Central differences of scalar ``f()`` with respect to every entry of ``params``."""
    grads = []
    for p in params:
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            old = p[idx]
            p[idx] = old + eps
            up = f()
            p[idx] = old - eps
            down = f()
            p[idx] = old
            g[idx] = (up - down) / (2 * eps)
        grads.append(g)
    return grads


class TestMLP:
    """Tests for the fully connected network."""

    def test_output_shape(self, rng):
        """Batches of rows map to batches of outputs."""
        from compliant_rl.networks import MLP

        net = MLP([4, 8, 3], rng)
        assert net(np.zeros((5, 4))).shape == (5, 3)
        assert net(np.zeros(4)).shape == (1, 3)

    def test_rejects_wrong_width(self, rng):
        """Inputs of the wrong width raise."""
        from compliant_rl.networks import MLP

        with pytest.raises(ValueError, match="input width"):
            MLP([4, 3], rng)(np.zeros((2, 5)))

    def test_backward_matches_finite_differences(self, rng):
        """Parameter and input gradients agree with central differences."""
        from compliant_rl.networks import MLP

        net = MLP([3, 5, 4, 2], rng)
        for w in net.weights:
            w[...] = rng.normal(0.0, 0.5, w.shape)
        x = rng.normal(size=(6, 3))
        target = rng.normal(size=(6, 2))

        def loss():
            return 0.5 * float(np.sum((net(x) - target) ** 2))

        out, cache = net.forward(x)
        grads, grad_x = net.backward(cache, out - target)
        for analytic, numeric in zip(grads, numeric_gradient(loss, net.parameters())):
            np.testing.assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-7)

        (numeric_x,) = numeric_gradient(loss, [x])
        np.testing.assert_allclose(grad_x, numeric_x, rtol=1e-5, atol=1e-7)

    def test_copy_is_independent(self, rng):
        """Copies do not share storage."""
        from compliant_rl.networks import MLP

        net = MLP([2, 3, 1], rng)
        clone = net.copy()
        clone.weights[0] += 1.0
        assert not np.allclose(net.weights[0], clone.weights[0])

    def test_load_parameters_checks_shapes(self, rng):
        """Mismatched shapes are refused."""
        from compliant_rl.networks import MLP

        net = MLP([2, 3, 1], rng)
        with pytest.raises(ValueError, match="shape mismatch"):
            net.load_parameters([np.zeros((3, 3))] + net.parameters()[1:])

    def test_named_parameters(self, rng):
        """Keys follow prefix/W{i} and prefix/b{i}."""
        from compliant_rl.networks import MLP

        names = list(MLP([2, 3, 1], rng).named_parameters("q1"))
        assert names == ["q1/W0", "q1/b0", "q1/W1", "q1/b1"]


class TestAdam:
    """Tests for the optimizer."""

    def test_minimizes_quadratic(self):
        """Adam drives a quadratic to its minimum."""
        from compliant_rl.networks import Adam

        p = np.array([3.0, -2.0])
        opt = Adam([p], lr=0.1)
        for _ in range(1000):
            opt.step([2.0 * p])
        np.testing.assert_allclose(p, 0.0, atol=5e-2)

    def test_first_step_size_is_lr(self):
        """Bias correction makes the first step exactly lr in magnitude."""
        from compliant_rl.networks import Adam

        p = np.array([1.0])
        Adam([p], lr=0.01).step([np.array([123.0])])
        assert p[0] == pytest.approx(0.99, abs=1e-8)

    def test_state_round_trip(self):
        """Saved moments reload into a fresh optimizer."""
        from compliant_rl.networks import Adam

        p = np.array([1.0, 2.0])
        opt = Adam([p], lr=0.01)
        opt.step([np.array([0.5, -0.5])])
        fresh = Adam([p.copy()], lr=0.01)
        fresh.load_state("opt", opt.state("opt"))
        assert fresh.t == 1
        np.testing.assert_allclose(fresh.m[0], opt.m[0])
        np.testing.assert_allclose(fresh.v[0], opt.v[0])
