"""AdamW with decoupled weight decay."""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from .autograd import Parameter

LR = 5e-4
BETAS = (0.9, 0.999)
EPS = 1e-8
WEIGHT_DECAY = 5e-5


def adamw_step(
    params: Sequence[Parameter],
    grads: Mapping[Parameter, np.ndarray],
    lr: float = LR,
    betas: tuple[float, float] = BETAS,
    eps: float = EPS,
    weight_decay: float = WEIGHT_DECAY,
    t: int = 1,
) -> None:
    """Update ``params`` in place for step number ``t`` (1-based).

    Decay multiplies the weights by ``1 - lr * weight_decay`` before the moment update,
    so it never enters the moment estimates.
    """
    if t < 1:
        raise ValueError("step count t must be >= 1")
    b1, b2 = betas
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for p in params:
        g = grads[p]
        if weight_decay:
            p.data *= 1.0 - lr * weight_decay
        p.m *= b1
        p.m += (1.0 - b1) * g
        p.v *= b2
        p.v += (1.0 - b2) * (g * g)
        p.data -= lr * (p.m / c1) / (np.sqrt(p.v / c2) + eps)


class AdamW:
    def __init__(self, params: Sequence[Parameter], lr: float = LR, betas=BETAS, eps: float = EPS,
                 weight_decay: float = WEIGHT_DECAY):
        self.params = list(params)
        self.lr = lr
        self.betas = tuple(betas)
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0

    def step(self, grads: Mapping[Parameter, np.ndarray]) -> None:
        self.t += 1
        adamw_step(self.params, grads, self.lr, self.betas, self.eps, self.weight_decay, self.t)
