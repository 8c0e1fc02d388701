"""Small sequence-model building blocks on top of the autodiff engine.

Everything operates on a single sequence at a time: hidden states are
[T, H] matrices, pooled vectors are kept 2-D as [1, H]. Parameters are
plain Tensors collected into ordered name -> Tensor dicts for the
optimizer and the checkpoint format.
"""

from __future__ import annotations

import math

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ShapeError


def linear_init(rng: np.random.Generator, n_in: int, n_out: int,
                scale: float | None = None) -> Tensor:
    s = scale if scale is not None else 1.0 / math.sqrt(n_in)
    return Tensor(rng.normal(0.0, s, size=(n_in, n_out)), requires_grad=True)


def zeros_init(shape) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True)


class Linear:
    def __init__(self, rng, n_in: int, n_out: int, scale: float | None = None):
        self.w = linear_init(rng, n_in, n_out, scale)
        self.b = zeros_init((1, n_out))

    def __call__(self, x: Tensor) -> Tensor:
        return ad.affine(x, self.w, self.b)

    def params(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.w": self.w, f"{prefix}.b": self.b}


class SelfAttention:
    """Single-head scaled dot-product self-attention over [T, H] states."""

    def __init__(self, rng, hidden: int):
        self.wq = linear_init(rng, hidden, hidden)
        self.wk = linear_init(rng, hidden, hidden)
        self.wv = linear_init(rng, hidden, hidden)
        self.wo = linear_init(rng, hidden, hidden)
        self._scale = 1.0 / math.sqrt(hidden)

    def __call__(self, h: Tensor, mask: np.ndarray | None = None) -> Tensor:
        q = ad.matmul(h, self.wq)
        k = ad.matmul(h, self.wk)
        v = ad.matmul(h, self.wv)
        scores = ad.mul(ad.matmul(q, k, transpose_b=True), self._scale)
        if mask is not None:
            scores = ad.add(scores, Tensor(mask))
        attn = ad.softmax(scores, axis=-1)
        return ad.matmul(ad.matmul(attn, v), self.wo)

    def params(self, prefix: str) -> dict[str, Tensor]:
        return {
            f"{prefix}.wq": self.wq,
            f"{prefix}.wk": self.wk,
            f"{prefix}.wv": self.wv,
            f"{prefix}.wo": self.wo,
        }


class Block:
    """Attention followed by a relu MLP, each folded in with tanh(x + f(x))."""

    def __init__(self, rng, hidden: int, ffn_mult: int = 2):
        self.attn = SelfAttention(rng, hidden)
        self.w1 = linear_init(rng, hidden, ffn_mult * hidden)
        self.b1 = zeros_init((1, ffn_mult * hidden))
        self.w2 = linear_init(rng, ffn_mult * hidden, hidden)
        self.b2 = zeros_init((1, hidden))

    def __call__(self, h: Tensor, mask: np.ndarray | None = None) -> Tensor:
        h = ad.tanh(ad.add(h, self.attn(h, mask)))
        f = ad.add(ad.matmul(ad.relu(ad.add(ad.matmul(h, self.w1), self.b1)), self.w2), self.b2)
        return ad.tanh(ad.add(h, f))

    def params(self, prefix: str) -> dict[str, Tensor]:
        out = self.attn.params(f"{prefix}.attn")
        out.update({
            f"{prefix}.w1": self.w1,
            f"{prefix}.b1": self.b1,
            f"{prefix}.w2": self.w2,
            f"{prefix}.b2": self.b2,
        })
        return out


class SequenceEncoder:
    """Token + position embeddings and a stack of bidirectional blocks."""

    def __init__(self, rng, vocab_size: int, hidden: int, n_layers: int,
                 max_positions: int):
        self.vocab_size = vocab_size
        self.hidden = hidden
        self.max_positions = max_positions
        self.embed = Tensor(rng.normal(0.0, 0.1, size=(vocab_size, hidden)),
                            requires_grad=True)
        self.pos = Tensor(rng.normal(0.0, 0.05, size=(max_positions, hidden)),
                          requires_grad=True)
        self.blocks = [Block(rng, hidden) for _ in range(n_layers)]

    def hidden_states(self, token_ids) -> Tensor:
        t = len(token_ids)
        if t == 0:
            raise ShapeError("empty token sequence")
        if t > self.max_positions:
            raise ShapeError(f"sequence length {t} exceeds {self.max_positions}")
        h = ad.add(ad.embedding_lookup(self.embed, token_ids),
                   ad.narrow(self.pos, slice(0, t)))
        for block in self.blocks:
            h = block(h)
        return h

    def pooled(self, token_ids) -> Tensor:
        return ad.tmean(self.hidden_states(token_ids), axis=0, keepdims=True)

    def params(self, prefix: str) -> dict[str, Tensor]:
        out = {f"{prefix}.embed": self.embed, f"{prefix}.pos": self.pos}
        for i, block in enumerate(self.blocks):
            out.update(block.params(f"{prefix}.blocks.{i}"))
        return out


def prefix_causal_mask(prompt_len: int, total_len: int) -> np.ndarray:
    """Additive mask: full attention inside the prompt, causal over targets.

    Prompt rows never see target rows, so teacher-forced predictions at
    step k are unaffected by tokens at positions >= k.
    """
    m = np.full((total_len, total_len), ad.MASK_VALUE)
    m[:prompt_len, :prompt_len] = 0.0
    for i in range(prompt_len, total_len):
        m[i, :prompt_len] = 0.0
        m[i, prompt_len:i + 1] = 0.0
    return m


def assign_params(params: dict[str, Tensor], arrays: dict[str, np.ndarray]) -> None:
    """Load checkpoint arrays into live parameter tensors, in place."""
    for name, p in params.items():
        if name not in arrays:
            raise ShapeError(f"checkpoint missing parameter {name!r}")
        arr = np.asarray(arrays[name], dtype=np.float64)
        if arr.shape != p.data.shape:
            raise ShapeError(f"{name}: checkpoint shape {arr.shape} != {p.data.shape}")
        p.data[...] = arr
