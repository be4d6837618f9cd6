from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import ShapeError, Tensor


@dataclass
class AdamState:
    """Adam moments plus a staircase learning-rate decay.

    ``step`` counts completed updates. The update that follows ``step``
    completed ones uses ``base_lr * decay ** (step // decay_interval)`` and
    bias correction with ``t = step + 1``.
    """

    base_lr: float = 0.002
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    decay: float = 0.98
    decay_interval: int = 400
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def lr_at(self, step: int | None = None) -> float:
        s = self.step if step is None else step
        return self.base_lr * self.decay ** (s // self.decay_interval)


def adam_step(state: AdamState, params: list[Tensor], grads: list[np.ndarray] | None = None) -> None:
    """Apply one Adam update in place to ``params``."""
    if grads is None:
        grads = [p.grad for p in params]
    lr = state.lr_at()
    t = state.step + 1
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    for p, g in zip(params, grads):
        if g.shape != p.shape:
            raise ShapeError(f"adam_step[{p.name}]", p.shape, g.shape)
        m = state.m.get(p.name)
        if m is None:
            m = state.m[p.name] = np.zeros_like(p.data)
            state.v[p.name] = np.zeros_like(p.data)
        v = state.v[p.name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p.data -= (lr * (m / c1) / (np.sqrt(v / c2) + state.eps)).astype(p.dtype)
    state.step = t
