"""Tape-based reverse-mode differentiation over dense float64 arrays.

Arrays that are already ``np.longdouble`` keep that precision, which lets a finite-difference
check evaluate the same forward code with a smaller rounding floor.

Operations executed while a :class:`Tape` is active are appended to it together with a
closure mapping the output gradient to input gradients. :func:`backward` replays the tape
in reverse. Outside a tape nothing is recorded, which is what inference uses.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

DTYPE = np.float64

_active: list["Tape"] = []


class Tensor:
    __slots__ = ("data", "requires_grad", "grad")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data)
        self.data = arr if arr.dtype == np.longdouble else arr.astype(DTYPE, copy=False)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_tensor(other)))

    def __rsub__(self, other):
        return add(as_tensor(other), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)


class Parameter(Tensor):
    """A learnable tensor with AdamW moment buffers."""

    __slots__ = ("name", "m", "v")

    def __init__(self, name: str, data):
        super().__init__(data, requires_grad=True)
        self.name = name
        self.m = np.zeros_like(self.data)
        self.v = np.zeros_like(self.data)

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"


class Node:
    __slots__ = ("out", "inputs", "backward")

    def __init__(self, out: Tensor, inputs: Sequence[Tensor], backward: Callable):
        self.out = out
        self.inputs = inputs
        self.backward = backward


class Tape:
    """Ordered record of executed primitives; use as a context manager."""

    def __init__(self):
        self.nodes: list[Node] = []

    def __enter__(self) -> "Tape":
        _active.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _active.remove(self)

    def __len__(self) -> int:
        return len(self.nodes)


def recording() -> bool:
    return bool(_active)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _record(data: np.ndarray, inputs: Sequence[Tensor], backward: Callable) -> Tensor:
    """Wrap ``data``; ``backward(g)`` returns one gradient (or None) per input."""
    if _active and any(t.requires_grad for t in inputs):
        out = Tensor(data, requires_grad=True)
        _active[-1].nodes.append(Node(out, inputs, backward))
        return out
    return Tensor(data)


def unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def backward(tape: Tape, loss: Tensor, params: Iterable[Parameter] = ()) -> dict[Parameter, np.ndarray]:
    """Reverse-mode pass over ``tape`` from scalar ``loss``.

    Returns gradients for ``params`` (zeros for those the loss does not reach). The tape is
    left untouched, so calling this twice gives identical results.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(tape.nodes):
        g = grads.pop(id(node.out), None)
        if g is None:
            continue
        for t, gi in zip(node.inputs, node.backward(g)):
            if gi is None or not t.requires_grad:
                continue
            key = id(t)
            if key in grads:
                grads[key] = grads[key] + gi
            else:
                grads[key] = gi
    return {p: grads.get(id(p), np.zeros_like(p.data)) for p in params}


# ---------------------------------------------------------------------------
# Primitives


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _record(a.data + b.data, (a, b),
                   lambda g: (unbroadcast(g, a.shape), unbroadcast(g, b.shape)))


def neg(a: Tensor) -> Tensor:
    return _record(-a.data, (a,), lambda g: (-g,))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _record(a.data * b.data, (a, b),
                   lambda g: (unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data, b.shape)))


def scale(a: Tensor, k: float) -> Tensor:
    return _record(a.data * k, (a,), lambda g: (g * k,))


def matmul(a, b) -> Tensor:
    """``a @ b`` where ``b`` is 2-D and ``a`` has any number of leading dimensions."""
    a, b = as_tensor(a), as_tensor(b)
    if b.ndim != 2 or a.shape[-1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch {a.shape} @ {b.shape}")

    def grad(g):
        ga = g @ b.data.T if a.requires_grad else None
        gb = None
        if b.requires_grad:
            gb = a.data.reshape(-1, a.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        return ga, gb

    return _record(a.data @ b.data, (a, b), grad)


def spmm(adj: sp.csr_matrix, h: Tensor) -> Tensor:
    """Constant sparse matrix times ``h`` (rows of ``h`` are nodes)."""
    adj_t = adj.T.tocsr()
    return _record(np.asarray(adj @ h.data), (h,), lambda g: (np.asarray(adj_t @ g),))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _record(a.data * mask, (a,), lambda g: (g * mask,))


def sigmoid_array(x: np.ndarray) -> np.ndarray:
    return 0.5 * (np.tanh(0.5 * x) + 1.0)


def sigmoid(a: Tensor) -> Tensor:
    s = sigmoid_array(a.data)
    return _record(s, (a,), lambda g: (g * s * (1.0 - s),))


def tanh(a: Tensor) -> Tensor:
    t = np.tanh(a.data)
    return _record(t, (a,), lambda g: (g * (1.0 - t * t),))


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    axis = axis % tensors[0].ndim
    bounds = np.cumsum([0] + [t.shape[axis] for t in tensors])

    def grad(g):
        return tuple(
            np.take(g, np.arange(bounds[k], bounds[k + 1]), axis=axis) for k in range(len(tensors))
        )

    return _record(np.concatenate([t.data for t in tensors], axis=axis), tensors, grad)


def getitem(a: Tensor, index) -> Tensor:
    def grad(g):
        out = np.zeros_like(a.data)
        np.add.at(out, index, g)
        return (out,)

    return _record(a.data[index], (a,), grad)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    return _record(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def transpose(a: Tensor, axes: tuple[int, ...]) -> Tensor:
    inverse = tuple(np.argsort(axes))
    return _record(a.data.transpose(axes), (a,), lambda g: (g.transpose(inverse),))


def flip(a: Tensor, axis: int) -> Tensor:
    return _record(np.flip(a.data, axis), (a,), lambda g: (np.flip(g, axis),))


def broadcast_to(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    return _record(np.broadcast_to(a.data, shape).copy(), (a,), lambda g: (unbroadcast(g, a.shape),))


def sum_(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    def grad(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _record(np.sum(a.data, axis=axis, keepdims=keepdims), (a,), grad)


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    n = a.data.size if axis is None else np.prod([a.shape[k] for k in np.atleast_1d(axis)])
    return scale(sum_(a, axis, keepdims), 1.0 / n)


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    p = np.exp(out)
    return _record(out, (a,), lambda g: (g - p * g.sum(axis=axis, keepdims=True),))


def nll_loss(log_probs: Tensor, targets, weights: np.ndarray | None = None) -> Tensor:
    """Mean negative log-likelihood of integer ``targets`` under rows of ``log_probs``.

    With class ``weights`` the mean is weighted: ``sum(w[y] * nll) / sum(w[y])``.
    """
    targets = np.asarray(targets, dtype=np.int64).reshape(-1)
    lp = log_probs.data.reshape(-1, log_probs.shape[-1])
    if targets.shape[0] != lp.shape[0]:
        raise ValueError(f"{targets.shape[0]} targets for {lp.shape[0]} predictions")
    n_classes = lp.shape[1]
    if targets.size and (targets.min() < 0 or targets.max() >= n_classes):
        raise ValueError(f"target class out of range [0, {n_classes})")
    w = np.ones(targets.shape[0]) if weights is None else np.asarray(weights, dtype=DTYPE)[targets]
    total = w.sum()
    rows = np.arange(targets.shape[0])
    value = -(w * lp[rows, targets]).sum() / total

    def grad(g):
        out = np.zeros_like(lp)
        out[rows, targets] = -w / total
        return ((g * out).reshape(log_probs.shape),)

    return _record(np.array(value), (log_probs,), grad)


def dropout(a: Tensor, p: float, training: bool, rng: np.random.Generator | None) -> Tensor:
    """Inverted dropout: zero with probability ``p``, rescale survivors by ``1/(1-p)``."""
    if not 0.0 <= p < 1.0:
        raise ValueError("dropout probability must be in [0, 1)")
    if not training or p == 0.0:
        return a
    mask = (rng.random(a.shape) >= p) / (1.0 - p)
    return _record(a.data * mask, (a,), lambda g: (g * mask,))
