"""AdamW update rule against a hand-rolled reference."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stylelab import autodiff as ad
from stylelab.autodiff import Tensor
from stylelab.optim import AdamW, add_grads, grads_from_map


def reference_adamw(w0, grads, lr, b1, b2, eps, wd):
    """Textbook bias-corrected Adam with decoupled decay."""
    w = w0.copy()
    m = np.zeros_like(w)
    v = np.zeros_like(w)
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        w = w - lr * (m_hat / (np.sqrt(v_hat) + eps) + wd * w)
    return w


class TestAdamW:
    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=30, deadline=None)
    def test_matches_reference_over_steps(self, seed):
        rng = np.random.default_rng(seed)
        w0 = rng.normal(size=(3, 2))
        grads = [rng.normal(size=(3, 2)) for _ in range(5)]
        p = Tensor(w0.copy(), requires_grad=True)
        opt = AdamW({"w": p}, lr=0.01, betas=(0.9, 0.999), eps=1e-8,
                    weight_decay=0.04)
        for g in grads:
            opt.step({"w": g})
        expected = reference_adamw(w0, grads, 0.01, 0.9, 0.999, 1e-8, 0.04)
        np.testing.assert_allclose(p.data, expected, atol=1e-12)

    def test_zero_lr_freezes_weights(self):
        p = Tensor(np.ones((2, 2)), requires_grad=True)
        opt = AdamW({"w": p}, lr=0.0, weight_decay=0.5)
        opt.step({"w": np.full((2, 2), 3.0)})
        np.testing.assert_array_equal(p.data, np.ones((2, 2)))

    def test_decay_is_decoupled_from_gradient(self):
        """With zero gradient the update is pure shrinkage: no Adam term."""
        p = Tensor(np.full((2,), 10.0), requires_grad=True)
        opt = AdamW({"w": p}, lr=0.1, weight_decay=0.5)
        opt.step({"w": np.zeros(2)})
        np.testing.assert_allclose(p.data, 10.0 - 0.1 * 0.5 * 10.0,
                                   atol=1e-12)

    def test_missing_gradient_skips_parameter(self):
        p = Tensor(np.full((2,), 4.0), requires_grad=True)
        q = Tensor(np.full((2,), 4.0), requires_grad=True)
        opt = AdamW({"p": p, "q": q}, lr=0.1, weight_decay=0.1)
        opt.step({"p": np.ones(2)})
        assert not np.array_equal(p.data, np.full((2,), 4.0))
        np.testing.assert_array_equal(q.data, np.full((2,), 4.0))

    def test_first_step_direction_is_signed_gradient(self):
        """Bias correction makes the first update lr * sign(g) before decay."""
        p = Tensor(np.zeros(3), requires_grad=True)
        opt = AdamW({"w": p}, lr=0.05, weight_decay=0.0)
        opt.step({"w": np.array([2.0, -0.5, 0.0])})
        np.testing.assert_allclose(
            p.data, [-0.05 * (1 - 1e-8 / (1 + 1e-8)), 0.05 * (1 - 2e-8 / (1 + 2e-8)), 0.0],
            atol=1e-9)


class TestGradPlumbing:
    def test_grads_from_map_zero_fills_untraced(self):
        a = Tensor(np.ones((2, 2)), requires_grad=True)
        b = Tensor(np.ones((2, 2)), requires_grad=True)
        loss = ad.tsum(ad.mul(a, 3.0))
        gm = ad.backward(loss)
        out = grads_from_map({"a": a, "b": b}, gm)
        np.testing.assert_allclose(out["a"], np.full((2, 2), 3.0))
        np.testing.assert_array_equal(out["b"], np.zeros((2, 2)))

    def test_add_grads_accumulates_and_copies(self):
        g1 = {"w": np.ones(2)}
        acc = add_grads(None, g1)
        assert acc["w"] is not g1["w"]
        acc = add_grads(acc, {"w": np.full(2, 2.0)})
        np.testing.assert_array_equal(acc["w"], np.full(2, 3.0))
        np.testing.assert_array_equal(g1["w"], np.ones(2))
