"""Adam with decoupled weight decay, constant learning rate."""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor


class AdamW:
    def __init__(self, params: dict[str, Tensor], lr: float,
                 betas: tuple[float, float] = (0.9, 0.999),
                 eps: float = 1e-8, weight_decay: float = 0.01):
        self.params = dict(params)
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self._m = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self._v = {k: np.zeros_like(p.data) for k, p in self.params.items()}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.b1 ** self.t
        bc2 = 1.0 - self.b2 ** self.t
        for name, p in self.params.items():
            g = grads.get(name)
            if g is None:
                continue
            m = self._m[name]
            v = self._v[name]
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * (g * g)
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            # decay applied to the weights directly, not mixed into the gradient
            p.data -= self.lr * (update + self.weight_decay * p.data)


def grads_from_map(params: dict[str, Tensor],
                   grad_map: dict[int, np.ndarray]) -> dict[str, np.ndarray]:
    """Pick per-parameter gradients out of a backward() node-id map.

    Parameters absent from the traced graph get zeros, so stale .grad
    values from earlier steps can never leak into an update.
    """
    out = {}
    for name, p in params.items():
        g = grad_map.get(p.nid)
        out[name] = np.zeros_like(p.data) if g is None else g
    return out


def add_grads(acc: dict[str, np.ndarray] | None,
              new: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    if acc is None:
        return {k: v.copy() for k, v in new.items()}
    for k, v in new.items():
        acc[k] += v
    return acc
