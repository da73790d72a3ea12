"""Layers built on the autograd primitives: affine/MLP, GRU and stacked Bi-GRU."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import autograd as ag
from .autograd import Parameter, Tensor, sigmoid_array


def xavier_normal_init(shape, fan_in: int, fan_out: int, rng_seed) -> np.ndarray:
    """Glorot normal: N(0, 2 / (fan_in + fan_out)). ``rng_seed`` is an int or a Generator."""
    if fan_in < 1 or fan_out < 1:
        raise ValueError("fans must be positive")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    return rng.normal(0.0, np.sqrt(2.0 / (fan_in + fan_out)), size=shape)


class Module:
    """Anything owning Parameters. Subclasses list children/params in ``_parts``."""

    _parts: tuple[str, ...] = ()

    def parameters(self) -> list[Parameter]:
        out: list[Parameter] = []
        for name in self._parts:
            part = getattr(self, name)
            items = part if isinstance(part, (list, tuple)) else [part]
            for item in items:
                if isinstance(item, Parameter):
                    out.append(item)
                elif isinstance(item, Module):
                    out.extend(item.parameters())
        return out


class Linear(Module):
    _parts = ("weight", "bias")

    def __init__(self, name: str, n_in: int, n_out: int, rng: np.random.Generator):
        self.weight = Parameter(f"{name}.weight", xavier_normal_init((n_in, n_out), n_in, n_out, rng))
        self.bias = Parameter(f"{name}.bias", np.zeros(n_out))

    def __call__(self, x: Tensor) -> Tensor:
        return ag.add(ag.matmul(x, self.weight), self.bias)


def mlp_forward(
    layers: Sequence[tuple[Parameter, Parameter]],
    x: Tensor,
    final_relu: bool = True,
    dropout: float = 0.0,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Affine layers with ReLU between them; the last activation is ReLU or identity.

    Dropout follows every hidden ReLU (and the final one when ``final_relu``).
    """
    h = ag.as_tensor(x)
    for k, (w, b) in enumerate(layers):
        if h.shape[-1] != w.shape[0] or b.shape != (w.shape[1],):
            raise ValueError(
                f"layer {k} ({getattr(w, 'name', '?')}): input width {h.shape[-1]} "
                f"does not match weight {w.shape} / bias {b.shape}"
            )
        h = ag.add(ag.matmul(h, w), b)
        last = k == len(layers) - 1
        if not last or final_relu:
            h = ag.relu(h)
            h = ag.dropout(h, dropout, training, rng)
    return h


class MLP(Module):
    _parts = ("layers",)

    def __init__(self, name: str, dims: Sequence[int], rng: np.random.Generator,
                 final_relu: bool = True, dropout: float = 0.0):
        self.layers = [Linear(f"{name}.{k}", dims[k], dims[k + 1], rng) for k in range(len(dims) - 1)]
        self.final_relu = final_relu
        self.dropout = dropout

    @property
    def out_dim(self) -> int:
        return self.layers[-1].weight.shape[1]

    def __call__(self, x: Tensor, training: bool = False, rng=None) -> Tensor:
        pairs = [(layer.weight, layer.bias) for layer in self.layers]
        return mlp_forward(pairs, x, self.final_relu, self.dropout, training, rng)


# ---------------------------------------------------------------------------
# GRU
#
# Gate blocks are packed in the order (update z, reset r, candidate): W is (in, 3H),
# U is (H, 3H), b is (3H,).


class GRUCell(Module):
    _parts = ("W", "U", "b")

    def __init__(self, name: str, n_in: int, hidden: int, rng: np.random.Generator):
        self.hidden = hidden
        self.W = Parameter(f"{name}.W", xavier_normal_init((n_in, 3 * hidden), n_in, 3 * hidden, rng))
        self.U = Parameter(f"{name}.U", xavier_normal_init((hidden, 3 * hidden), hidden, 3 * hidden, rng))
        self.b = Parameter(f"{name}.b", np.zeros(3 * hidden))


def gru_step(cell: GRUCell, x_t: Tensor, h_prev: Tensor) -> Tensor:
    """One GRU update composed from autograd primitives.

    z = σ(W_z x + U_z h + b_z), r = σ(W_r x + U_r h + b_r),
    ĥ = tanh(W_h x + U_h (r ⊙ h) + b_h), h' = (1 - z) ⊙ h + z ⊙ ĥ.
    """
    H = cell.hidden
    x_t, h_prev = ag.as_tensor(x_t), ag.as_tensor(h_prev)
    if x_t.shape[-1] != cell.W.shape[0] or h_prev.shape[-1] != H:
        raise ValueError(f"gru_step: got x {x_t.shape}, h {h_prev.shape} for W {cell.W.shape}")
    xw = ag.add(ag.matmul(x_t, cell.W), cell.b)
    hu = ag.matmul(h_prev, ag.getitem(cell.U, (slice(None), slice(0, 2 * H))))
    zr = ag.sigmoid(ag.add(ag.getitem(xw, (..., slice(0, 2 * H))), hu))
    z = ag.getitem(zr, (..., slice(0, H)))
    r = ag.getitem(zr, (..., slice(H, 2 * H)))
    cand = ag.tanh(ag.add(ag.getitem(xw, (..., slice(2 * H, 3 * H))),
                          ag.matmul(ag.mul(r, h_prev), ag.getitem(cell.U, (slice(None), slice(2 * H, 3 * H))))))
    return ag.add(ag.mul(ag.add(1.0, ag.neg(z)), h_prev), ag.mul(z, cand))


def gru_sequence(cell: GRUCell, x: Tensor, reverse: bool = False) -> Tensor:
    """Run ``cell`` over ``x`` of shape (batch, T, in) from a zero state.

    Output (batch, T, H): position t holds the state after consuming position t, scanning
    left-to-right, or right-to-left when ``reverse``. Recorded as one fused primitive with a
    hand-written backpropagation-through-time.
    """
    x = ag.as_tensor(x)
    B, T, _ = x.shape
    H = cell.hidden
    if T < 1:
        raise ValueError("empty sequence")
    W, U, b = cell.W.data, cell.U.data, cell.b.data
    U_zr, U_h = U[:, : 2 * H], U[:, 2 * H :]
    # time-major buffers keep per-step slices contiguous
    xw = np.ascontiguousarray((x.data @ W + b).transpose(1, 0, 2))
    dtype = np.result_type(xw, U)
    states = np.empty((T, B, H), dtype=dtype)
    prev = np.empty((T, B, H), dtype=dtype)
    gates = np.empty((T, B, 2 * H), dtype=dtype)
    gated_prev = np.empty((T, B, H), dtype=dtype)
    cands = np.empty((T, B, H), dtype=dtype)
    order = list(range(T - 1, -1, -1) if reverse else range(T))
    h = np.zeros((B, H), dtype=dtype)
    for t in order:
        zr = sigmoid_array(xw[t, :, : 2 * H] + h @ U_zr)
        rh = zr[:, H:] * h
        cand = np.tanh(xw[t, :, 2 * H :] + rh @ U_h)
        prev[t], gates[t], gated_prev[t], cands[t] = h, zr, rh, cand
        h = h + zr[:, :H] * (cand - h)
        states[t] = h
    out = states.transpose(1, 0, 2).copy()

    def grad(g):
        g = g.transpose(1, 0, 2)
        d_xw = np.empty_like(xw)
        carry = np.zeros((B, H))
        U_h_T, U_zr_T = U_h.T.copy(), U_zr.T.copy()
        for t in reversed(order):
            hp, z, r, cand = prev[t], gates[t, :, :H], gates[t, :, H:], cands[t]
            dh = g[t] + carry
            da_h = dh * z * (1.0 - cand * cand)
            drh = da_h @ U_h_T
            d_step = d_xw[t]
            d_step[:, :H] = dh * (cand - hp) * z * (1.0 - z)
            d_step[:, H : 2 * H] = drh * hp * r * (1.0 - r)
            d_step[:, 2 * H :] = da_h
            carry = dh * (1.0 - z) + drh * r + d_step[:, : 2 * H] @ U_zr_T
        flat = d_xw.reshape(-1, 3 * H)
        dU = np.concatenate([prev.reshape(-1, H).T @ flat[:, : 2 * H],
                             gated_prev.reshape(-1, H).T @ flat[:, 2 * H :]], axis=1)
        d_xw_bm = d_xw.transpose(1, 0, 2)
        dx = d_xw_bm @ W.T if x.requires_grad else None
        dW = x.data.reshape(-1, x.shape[-1]).T @ d_xw_bm.reshape(-1, 3 * H)
        return dx, dW, dU, flat.sum(axis=0)

    return ag._record(out, (x, cell.W, cell.U, cell.b), grad)


class BiGRU(Module):
    """Stacked bidirectional GRU; layer k reads the concatenated outputs of layer k-1."""

    _parts = ("forward_cells", "backward_cells")

    def __init__(self, name: str, n_in: int, hidden: int, n_layers: int, rng: np.random.Generator):
        if n_layers < 1:
            raise ValueError("n_layers must be >= 1")
        self.hidden = hidden
        self.forward_cells = []
        self.backward_cells = []
        for k in range(n_layers):
            width = n_in if k == 0 else 2 * hidden
            self.forward_cells.append(GRUCell(f"{name}.l{k}.fwd", width, hidden, rng))
            self.backward_cells.append(GRUCell(f"{name}.l{k}.bwd", width, hidden, rng))

    def __call__(self, x: Tensor) -> tuple[Tensor, Tensor]:
        return bigru_run(self.forward_cells, self.backward_cells, x)


def bigru_run(forward_cells: Sequence[GRUCell], backward_cells: Sequence[GRUCell],
              x: Tensor) -> tuple[Tensor, Tensor]:
    """Return the last layer's (left-to-right, right-to-left) state sequences, each (batch, T, H)."""
    if len(forward_cells) != len(backward_cells) or not forward_cells:
        raise ValueError("need matching, non-empty forward/backward layer stacks")
    x = ag.as_tensor(x)
    if x.ndim == 2:
        x = ag.reshape(x, (1,) + x.shape)
    if x.shape[1] < 1:
        raise ValueError("empty sequence")
    fwd = bwd = None
    inp = x
    for fcell, bcell in zip(forward_cells, backward_cells):
        fwd = gru_sequence(fcell, inp)
        bwd = gru_sequence(bcell, inp, reverse=True)
        inp = ag.concat([fwd, bwd], axis=-1)
    return fwd, bwd
