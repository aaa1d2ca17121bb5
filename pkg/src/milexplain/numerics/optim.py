from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import ShapeError


@dataclass
class AdagradState:
    lr: float = 0.05
    eps: float = 1e-10
    accum: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")


def adagrad_step(state, params, grads):
    """In-place Adagrad update of the ``params`` dict; returns it.

    ``accum += g**2`` then ``p -= lr * g / (sqrt(accum) + eps)``.
    """
    for name, g in grads.items():
        p = params[name]
        if p.shape != g.shape:
            raise ShapeError(f"adagrad: param {name} {p.shape} vs grad {g.shape}")
        acc = state.accum.get(name)
        if acc is None:
            acc = state.accum[name] = np.zeros_like(p)
        elif acc.shape != p.shape:
            raise ShapeError(f"adagrad: accumulator {name} {acc.shape} vs {p.shape}")
        acc += g * g
        p -= state.lr * g / (np.sqrt(acc) + state.eps)
    return params
