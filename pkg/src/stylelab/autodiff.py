"""Minimal reverse-mode automatic differentiation over dense float64 tensors.

Dynamic define-by-run graph: every op returns a fresh ``Tensor`` node that
remembers its parents and a vector-Jacobian closure per parent. Graphs are
rebuilt every step and reclaimed by ordinary garbage collection; ``backward``
walks the node-id order (creation order is already topological).

All values are float64. Every op validates that its output is finite; a
NaN/Inf is treated as a hard error, not a value.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ContractError, DomainError, NumericsError, ShapeError

_NODE_IDS = itertools.count()

# Additive attention-mask value: exp(MASK - max) underflows to exactly 0.0.
MASK_VALUE = -1e30


def _as_array(value) -> np.ndarray:
    return np.asarray(value, dtype=np.float64)


class Tensor:
    """Dense float64 array plus the bookkeeping reverse mode needs."""

    __slots__ = ("nid", "data", "requires_grad", "grad", "op", "_vjps")

    def __init__(self, data, requires_grad: bool = False, op: str = "leaf", vjps=()):
        self.nid = next(_NODE_IDS)
        self.data = _as_array(data)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.op = op
        self._vjps = tuple(vjps)
        # a single reduction: any NaN or +-Inf makes the sum non-finite
        if not np.isfinite(np.sum(self.data)):
            raise NumericsError(f"non-finite values produced by op '{op}'")

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() on tensor of size {self.data.size}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy(), requires_grad=False, op="detach")

    def backward(self) -> dict[int, np.ndarray]:
        return backward(self)

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __truediv__(self, other):
        return div(self, other)

    def __getitem__(self, key):
        return narrow(self, key)

    def __repr__(self):
        return f"Tensor(op={self.op!r}, shape={self.data.shape})"


def tensor(data, requires_grad: bool = False) -> Tensor:
    return Tensor(data, requires_grad=requires_grad)


def _ensure(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data, op: str, vjps: Sequence[tuple[Tensor, Callable]]) -> Tensor:
    live = tuple((p, f) for p, f in vjps if p.requires_grad)
    return Tensor(data, requires_grad=bool(live), op=op, vjps=live)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to the parent's shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# ---------------------------------------------------------------------------
# primitive ops
# ---------------------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _ensure(a), _ensure(b)
    try:
        out = a.data + b.data
    except ValueError as exc:
        raise ShapeError(f"add: {a.shape} vs {b.shape}") from exc
    return _node(out, "add", [
        (a, lambda g, sa=a.data.shape: _unbroadcast(g, sa)),
        (b, lambda g, sb=b.data.shape: _unbroadcast(g, sb)),
    ])


def mul(a, b) -> Tensor:
    a, b = _ensure(a), _ensure(b)
    try:
        out = a.data * b.data
    except ValueError as exc:
        raise ShapeError(f"mul: {a.shape} vs {b.shape}") from exc
    return _node(out, "mul", [
        (a, lambda g: _unbroadcast(g * b.data, a.data.shape)),
        (b, lambda g: _unbroadcast(g * a.data, b.data.shape)),
    ])


def div(a, b) -> Tensor:
    a, b = _ensure(a), _ensure(b)
    try:
        out = a.data / b.data
    except ValueError as exc:
        raise ShapeError(f"div: {a.shape} vs {b.shape}") from exc
    return _node(out, "div", [
        (a, lambda g: _unbroadcast(g / b.data, a.data.shape)),
        (b, lambda g: _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape)),
    ])


def matmul(a, b, transpose_a: bool = False, transpose_b: bool = False) -> Tensor:
    a, b = _ensure(a), _ensure(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.shape} @ {b.shape}")
    am = a.data.T if transpose_a else a.data
    bm = b.data.T if transpose_b else b.data
    if am.shape[1] != bm.shape[0]:
        raise ShapeError(f"matmul: inner dims differ, {am.shape} @ {bm.shape}")
    out = am @ bm

    def vjp_a(g):
        da = g @ bm.T
        return da.T if transpose_a else da

    def vjp_b(g):
        db = am.T @ g
        return db.T if transpose_b else db

    return _node(out, "matmul", [(a, vjp_a), (b, vjp_b)])


def affine(x, w, b) -> Tensor:
    """x @ w + b with a row-broadcast bias, fused into one node."""
    x, w, b = _ensure(x), _ensure(w), _ensure(b)
    out = x.data @ w.data + b.data

    def vjp_x(g):
        return g @ w.data.T

    def vjp_w(g):
        return x.data.T @ g

    def vjp_b(g):
        return _unbroadcast(g, b.data.shape)

    return _node(out, "affine", [(x, vjp_x), (w, vjp_w), (b, vjp_b)])


def tanh(x) -> Tensor:
    x = _ensure(x)
    out = np.tanh(x.data)
    return _node(out, "tanh", [(x, lambda g: g * (1.0 - out * out))])


def relu(x) -> Tensor:
    x = _ensure(x)
    out = np.maximum(x.data, 0.0)
    return _node(out, "relu", [(x, lambda g: g * (x.data > 0.0))])


def exp(x) -> Tensor:
    x = _ensure(x)
    out = np.exp(x.data)
    if not np.all(np.isfinite(out)):
        raise NumericsError("exp overflow")
    return _node(out, "exp", [(x, lambda g: g * out)])


def log(x) -> Tensor:
    x = _ensure(x)
    if np.any(x.data <= 0.0):
        raise DomainError("log of non-positive argument")
    return _node(np.log(x.data), "log", [(x, lambda g: g / x.data)])


def softmax(x, axis: int = -1) -> Tensor:
    """Max-subtracted softmax along ``axis``."""
    x = _ensure(x)
    shifted = x.data - np.max(x.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        dot = (g * out).sum(axis=axis, keepdims=True)
        return out * (g - dot)

    return _node(out, "softmax", [(x, vjp)])


def tsum(x, axis=None, keepdims: bool = False) -> Tensor:
    x = _ensure(x)
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is None:
            return np.broadcast_to(g, x.data.shape).copy()
        gg = g if keepdims else np.expand_dims(g, axis)
        return np.broadcast_to(gg, x.data.shape).copy()

    return _node(out, "sum", [(x, vjp)])


def tmean(x, axis=None, keepdims: bool = False) -> Tensor:
    x = _ensure(x)
    out = x.data.mean(axis=axis, keepdims=keepdims)
    count = x.data.size if axis is None else x.data.shape[axis]

    def vjp(g):
        if axis is None:
            return np.broadcast_to(g, x.data.shape) / count
        gg = g if keepdims else np.expand_dims(g, axis)
        return np.broadcast_to(gg, x.data.shape) / count

    return _node(out, "mean", [(x, vjp)])


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    parts = [_ensure(p) for p in parts]
    if not parts:
        raise ShapeError("concat of zero tensors")
    try:
        out = np.concatenate([p.data for p in parts], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"concat: {[p.shape for p in parts]}") from exc
    vjps = []
    offset = 0
    for p in parts:
        width = p.data.shape[axis]

        def vjp(g, start=offset, w=width):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(start, start + w)
            return g[tuple(sl)]

        vjps.append((p, vjp))
        offset += width
    return _node(out, "concat", vjps)


def narrow(x, key) -> Tensor:
    """Basic slicing; the op kind 'slice' in the dispatcher."""
    x = _ensure(x)
    out = x.data[key]

    def vjp(g):
        full = np.zeros_like(x.data)
        np.add.at(full, key, g)
        return full

    return _node(out, "slice", [(x, vjp)])


def l2norm(x) -> Tensor:
    x = _ensure(x)
    n = float(np.sqrt((x.data * x.data).sum()))
    if n == 0.0:
        raise DomainError("l2norm of zero tensor")
    return _node(np.array(n), "l2norm", [(x, lambda g: g * (x.data / n))])


def embedding_lookup(table, ids) -> Tensor:
    """Gather rows ``table[ids]``; gradient scatters back into the table."""
    table = _ensure(table)
    if table.data.ndim != 2:
        raise ShapeError("embedding table must be 2-D")
    idx = np.asarray(ids, dtype=np.intp)
    if idx.ndim != 1:
        raise ShapeError("ids must be a flat sequence")
    if idx.size and (idx.min() < 0 or idx.max() >= table.data.shape[0]):
        raise ShapeError("id out of vocabulary range")
    out = table.data[idx]

    def vjp(g):
        full = np.zeros_like(table.data)
        np.add.at(full, idx, g)
        return full

    return _node(out, "embedding_lookup", [(table, vjp)])


def grad_reverse(x) -> Tensor:
    """Identity forward, negated gradient backward."""
    x = _ensure(x)
    return _node(x.data, "grad_reverse", [(x, lambda g: -g)])


# ---------------------------------------------------------------------------
# composites
# ---------------------------------------------------------------------------


def logsumexp(x: Tensor, axis: int = -1, keepdims: bool = False) -> Tensor:
    """log(sum(exp(x))) with the row max folded out as a constant shift."""
    x = _ensure(x)
    m = np.max(x.data, axis=axis, keepdims=True)
    s = tsum(exp(add(x, Tensor(-m))), axis=axis, keepdims=keepdims)
    shift = m if keepdims else np.squeeze(m, axis=axis)
    return add(log(s), Tensor(shift))


def l2_normalize(x: Tensor) -> Tensor:
    return div(x, l2norm(x))


# ---------------------------------------------------------------------------
# graph introspection, backward, checking
# ---------------------------------------------------------------------------


@dataclass
class OpRecord:
    nid: int
    op: str
    parent_ids: tuple
    tensor: Tensor


class Graph:
    """Topologically ordered op records reachable from a root tensor."""

    def __init__(self, records: list[OpRecord]):
        self.records = records

    @classmethod
    def trace(cls, root: Tensor) -> "Graph":
        nodes = _reachable(root)
        return cls([
            OpRecord(n.nid, n.op, tuple(p.nid for p, _ in n._vjps), n)
            for n in nodes
        ])


def _reachable(root: Tensor) -> list[Tensor]:
    """All nodes reachable from root, ascending creation order (topological)."""
    seen: dict[int, Tensor] = {}
    stack = [root]
    while stack:
        n = stack.pop()
        if n.nid in seen:
            continue
        seen[n.nid] = n
        for p, _ in n._vjps:
            if p.nid not in seen:
                stack.append(p)
    return [seen[k] for k in sorted(seen)]


def backward(loss: Tensor) -> dict[int, np.ndarray]:
    """Reverse sweep from a scalar loss. Returns node id -> gradient.

    Accumulation buffers are freshly zero-initialized on every call, so
    repeated sweeps over the same graph are bit-identical. Gradients are
    also stored on each node's ``.grad``.
    """
    if loss.data.size != 1:
        raise ContractError("backward requires a scalar loss node")
    nodes = _reachable(loss)
    grads: dict[int, np.ndarray] = {loss.nid: np.ones_like(loss.data)}
    for n in reversed(nodes):
        g = grads.get(n.nid)
        if g is None:
            g = np.zeros_like(n.data)
            grads[n.nid] = g
        for parent, vjp in n._vjps:
            pid = parent.nid
            existing = grads.get(pid)
            if existing is None:
                grads[pid] = vjp(g)
            else:
                grads[pid] = existing + vjp(g)
    for n in nodes:
        n.grad = grads[n.nid]
    return grads


_DISPATCH = {
    "matmul": matmul,
    "affine": affine,
    "add": add,
    "mul": mul,
    "tanh": tanh,
    "relu": relu,
    "exp": exp,
    "log": log,
    "softmax": softmax,
    "sum": tsum,
    "mean": tmean,
    "concat": lambda *parts, axis=0: concat(parts, axis=axis),
    "slice": narrow,
    "l2norm": l2norm,
    "embedding_lookup": embedding_lookup,
}


def forward(op_kind: str, *inputs, **kwargs) -> Tensor:
    """Uniform entry point over the supported op set."""
    if op_kind not in _DISPATCH:
        raise ContractError(f"unknown op kind {op_kind!r}")
    return _DISPATCH[op_kind](*inputs, **kwargs)


def grad_check(build_loss: Callable[[], Tensor], params: Sequence[Tensor],
               h: float = 1e-5) -> float:
    """Max relative error between analytic gradients and central differences.

    ``build_loss`` must rebuild the scalar loss from the live ``params``
    tensors; their ``.data`` is perturbed in place and restored.
    """
    if h <= 0:
        raise ContractError("grad_check requires h > 0")
    loss = build_loss()
    backward(loss)
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy()
                for p in params]
    worst = 0.0
    for p, an in zip(params, analytic):
        flat = p.data.reshape(-1)
        aflat = an.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp = build_loss().item()
            flat[i] = orig - h
            lm = build_loss().item()
            flat[i] = orig
            fd = (lp - lm) / (2.0 * h)
            rel = abs(aflat[i] - fd) / (abs(aflat[i]) + 1e-8)
            if rel > worst:
                worst = rel
    if not math.isfinite(worst):
        raise NumericsError("grad_check produced a non-finite error")
    return worst
