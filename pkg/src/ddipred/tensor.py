"""Minimal dense-tensor engine with reverse-mode differentiation.

Everything is float64 and numpy-backed. Ops build an implicit graph of
parent references; ``backward`` walks it once in reverse topological
order. Only the primitives the model actually needs are provided.
"""
from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np


class Tensor:
    """A float64 array plus optional gradient tracking."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_needs")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None
        self._needs = requires_grad

    @property
    def shape(self):
        return self.data.shape

    def zero_grad(self):
        self.grad = None

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, needs_grad={self._needs})"

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def backward(self):
        backward(self)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: Sequence[Tensor], bwd) -> Tensor:
    out = Tensor(data)
    if any(p._needs for p in parents):
        out._parents = tuple(parents)
        out._backward = bwd
        out._needs = True
    return out


def _accum(t: Tensor, g: np.ndarray):
    if t._needs:
        t.grad = g.copy() if t.grad is None else t.grad + g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g.reshape(shape)


def backward(loss: Tensor):
    """Populate gradients of everything ``loss`` depends on."""
    if loss.data.ndim != 0 and loss.data.size != 1:
        raise ValueError("backward requires a scalar loss")
    # reverse topological order over the needs-grad subgraph
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen or not node._needs:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            stack.append((p, False))
    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


# ---------------------------------------------------------------------------
# primitives


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data + b.data

    def bwd(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(g, b.data.shape))

    return _make(out_data, (a, b), bwd)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data - b.data

    def bwd(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(-g, b.data.shape))

    return _make(out_data, (a, b), bwd)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data * b.data

    def bwd(g):
        _accum(a, _unbroadcast(g * b.data, a.data.shape))
        _accum(b, _unbroadcast(g * a.data, b.data.shape))

    return _make(out_data, (a, b), bwd)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data @ b.data

    def bwd(g):
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    return _make(out_data, (a, b), bwd)


def relu(x: Tensor) -> Tensor:
    # subgradient at 0 is 0
    mask = x.data > 0.0

    def bwd(g):
        _accum(x, g * mask)

    return _make(np.where(mask, x.data, 0.0), (x,), bwd)


def exp(x: Tensor) -> Tensor:
    out_data = np.exp(x.data)

    def bwd(g):
        _accum(x, g * out_data)

    return _make(out_data, (x,), bwd)


def log(x: Tensor) -> Tensor:
    def bwd(g):
        _accum(x, g / x.data)

    return _make(np.log(x.data), (x,), bwd)


def sigmoid(x: Tensor) -> Tensor:
    out_data = 1.0 / (1.0 + np.exp(-x.data))

    def bwd(g):
        _accum(x, g * out_data * (1.0 - out_data))

    return _make(out_data, (x,), bwd)


def neg_abs_diff(a: Tensor, b: Tensor) -> Tensor:
    """exp(-|a - b|), elementwise."""
    diff = a.data - b.data
    out_data = np.exp(-np.abs(diff))
    sign = np.sign(diff)

    def bwd(g):
        _accum(a, _unbroadcast(-g * out_data * sign, a.data.shape))
        _accum(b, _unbroadcast(g * out_data * sign, b.data.shape))

    return _make(out_data, (a, b), bwd)


def clip(x: Tensor, lo: float, hi: float) -> Tensor:
    mask = (x.data >= lo) & (x.data <= hi)

    def bwd(g):
        _accum(x, g * mask)

    return _make(np.clip(x.data, lo, hi), (x,), bwd)


def concat_last(xs: Sequence[Tensor]) -> Tensor:
    xs = [_as_tensor(x) for x in xs]
    out_data = np.concatenate([x.data for x in xs], axis=-1)
    sizes = [x.data.shape[-1] for x in xs]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        for x, lo, hi in zip(xs, offsets[:-1], offsets[1:]):
            _accum(x, g[..., lo:hi])

    return _make(out_data, xs, bwd)


def reshape(x: Tensor, shape) -> Tensor:
    def bwd(g):
        _accum(x, g.reshape(x.data.shape))

    return _make(x.data.reshape(shape), (x,), bwd)


def mean_rows(x: Tensor) -> Tensor:
    """Mean over axis 0 of a 2-D tensor."""
    n = x.data.shape[0]

    def bwd(g):
        _accum(x, np.broadcast_to(g / n, x.data.shape))

    return _make(x.data.mean(axis=0), (x,), bwd)


def sum_all(x: Tensor) -> Tensor:
    def bwd(g):
        _accum(x, np.broadcast_to(g, x.data.shape))

    return _make(x.data.sum(), (x,), bwd)


def mean_stack(xs: Sequence[Tensor]) -> Tensor:
    """Elementwise mean of same-shaped tensors."""
    xs = list(xs)
    k = len(xs)
    out_data = xs[0].data.copy()
    for x in xs[1:]:
        out_data += x.data
    out_data /= k

    def bwd(g):
        for x in xs:
            _accum(x, g / k)

    return _make(out_data, xs, bwd)


def gather_rows(x: Tensor, idx) -> Tensor:
    idx = np.asarray(idx, dtype=np.intp)

    def bwd(g):
        if x._needs:
            gx = np.zeros_like(x.data)
            np.add.at(gx, idx, g)
            _accum(x, gx)

    return _make(x.data[idx], (x,), bwd)


def segment_sum(x: Tensor, seg, num_segments: int) -> Tensor:
    """Sum rows of ``x`` into ``num_segments`` buckets given by ``seg``."""
    seg = np.asarray(seg, dtype=np.intp)
    out_data = np.zeros((num_segments,) + x.data.shape[1:])
    np.add.at(out_data, seg, x.data)

    def bwd(g):
        _accum(x, g[seg])

    return _make(out_data, (x,), bwd)


def segment_mean(x: Tensor, seg, num_segments: int) -> Tensor:
    """Per-segment mean; empty segments yield zero rows."""
    seg = np.asarray(seg, dtype=np.intp)
    counts = np.bincount(seg, minlength=num_segments).astype(np.float64)
    safe = np.maximum(counts, 1.0)
    out_data = np.zeros((num_segments,) + x.data.shape[1:])
    np.add.at(out_data, seg, x.data)
    out_data /= safe.reshape((-1,) + (1,) * (x.data.ndim - 1))

    def bwd(g):
        scaled = g / safe.reshape((-1,) + (1,) * (g.ndim - 1))
        _accum(x, scaled[seg])

    return _make(out_data, (x,), bwd)


def grouped_softmax(x: Tensor, groups, num_groups: int | None = None) -> Tensor:
    """Softmax within each group of a 1-D tensor, independently per group."""
    groups = np.asarray(groups, dtype=np.intp)
    if x.data.ndim != 1:
        raise ValueError("grouped_softmax expects a 1-D tensor")
    if groups.shape != x.data.shape:
        raise ValueError("groups must match scores in shape")
    if num_groups is None:
        num_groups = int(groups.max()) + 1 if groups.size else 0
    if x.data.size == 0:
        return _make(np.zeros(0), (x,), lambda g: _accum(x, np.zeros(0)))
    gmax = np.full(num_groups, -np.inf)
    np.maximum.at(gmax, groups, x.data)
    ex = np.exp(x.data - gmax[groups])
    denom = np.zeros(num_groups)
    np.add.at(denom, groups, ex)
    out_data = ex / denom[groups]

    def bwd(g):
        dot = np.zeros(num_groups)
        np.add.at(dot, groups, g * out_data)
        _accum(x, out_data * (g - dot[groups]))

    return _make(out_data, (x,), bwd)


def dropout(x: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout; caller decides train/eval placement."""
    if rate <= 0.0:
        return x
    mask = (rng.random(x.data.shape) >= rate) / (1.0 - rate)

    def bwd(g):
        _accum(x, g * mask)

    return _make(x.data * mask, (x,), bwd)


# ---------------------------------------------------------------------------
# gradient checking


def finite_diff_check(
    fn: Callable[[], Tensor],
    params: Iterable[Tensor],
    eps: float = 1e-5,
    max_coords_per_tensor: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``fn`` must be a deterministic closure over ``params`` returning a scalar.
    When ``max_coords_per_tensor`` is set, a random subset of coordinates of
    each tensor is probed instead of all of them.
    """
    params = list(params)
    for p in params:
        p.zero_grad()
    loss = fn()
    backward(loss)
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]
    if rng is None:
        rng = np.random.default_rng(0)
    worst = 0.0
    for p, ana in zip(params, analytic):
        flat = p.data.reshape(-1)
        n = flat.size
        if max_coords_per_tensor is not None and n > max_coords_per_tensor:
            coords = rng.choice(n, size=max_coords_per_tensor, replace=False)
        else:
            coords = range(n)
        ana_flat = ana.reshape(-1)
        for i in coords:
            orig = flat[i]
            flat[i] = orig + eps
            up = fn().item()
            flat[i] = orig - eps
            down = fn().item()
            flat[i] = orig
            fd = (up - down) / (2.0 * eps)
            err = abs(ana_flat[i] - fd) / max(1.0, abs(ana_flat[i]))
            worst = max(worst, err)
    return worst


def uniform_init(rng: np.random.Generator, shape, scale: float) -> Tensor:
    return Tensor(rng.uniform(-scale, scale, size=shape), requires_grad=True)
