# coding: utf-8
"""The numpy autograd engine, its layers and a finite-difference check."""

# %% [markdown]
# Operations run eagerly on float64 arrays. Inside a `Tape` context every op that touches a
# `Parameter` is recorded, and `backward` walks the tape in reverse to return one gradient
# per requested parameter. Nothing is stored on the tensors themselves.

# %%
import numpy as np

from tabularnet.nn import autograd as ag
from tabularnet.nn.layers import MLP, BiGRU
from tabularnet.nn.optim import AdamW

rng = np.random.default_rng(0)
w = ag.Parameter("w", rng.normal(size=(3, 2)))
x = ag.Tensor(rng.normal(size=(4, 3)))
with ag.Tape() as tape:
    loss = ag.mean(ag.tanh(ag.matmul(x, w)))
grad = ag.backward(tape, loss, [w])[w]
print("loss", float(loss.data))
print(grad)

# %% [markdown]
# A central difference agrees with the tape to many digits.

# %%
h = 1e-6
numeric = np.zeros_like(w.data)
for idx in np.ndindex(w.shape):
    keep = w.data[idx]
    w.data[idx] = keep + h
    up = float(ag.mean(ag.tanh(ag.matmul(x, w))).data)
    w.data[idx] = keep - h
    down = float(ag.mean(ag.tanh(ag.matmul(x, w))).data)
    w.data[idx] = keep
    numeric[idx] = (up - down) / (2 * h)
print("max abs difference", np.max(np.abs(numeric - grad)))

# %% [markdown]
# Layers are plain containers of parameters. A stacked Bi-GRU returns forward and backward
# states for every step of every sequence in the batch.

# %%
mlp = MLP("demo.mlp", [3, 32, 2], rng, final_relu=False)
bigru = BiGRU("demo.gru", 3, hidden=4, n_layers=3, rng=rng)
seq = rng.normal(size=(2, 5, 3))  # batch of 2 sequences, 5 steps each
fwd, bwd = bigru(ag.Tensor(seq))
print(mlp(x).shape, fwd.shape, bwd.shape)
print(len(mlp.parameters()), "MLP parameters,", len(bigru.parameters()), "Bi-GRU parameters")

# %% [markdown]
# AdamW fits the MLP to a small regression target.

# %%
target = rng.normal(size=(4, 2))
opt = AdamW(mlp.parameters(), lr=1e-2, weight_decay=0.0)
for step in range(301):
    with ag.Tape() as tape:
        diff = ag.add(mlp(x), ag.Tensor(-target))
        loss = ag.mean(ag.mul(diff, diff))
    opt.step(ag.backward(tape, loss, mlp.parameters()))
    if step % 100 == 0:
        print(step, round(float(loss.data), 5))
