"""Adam with bias correction and L2 weight decay folded into the gradient."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .layers import Conv2D, Dense


@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    l2_lambda: float = 1e-3
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def decays(layer, pname: str) -> bool:
    """L2 applies to conv and dense weights only, never to biases or BN parameters."""
    return pname == "weight" and isinstance(layer, (Conv2D, Dense))


def adam_update(state: AdamState, key, w: np.ndarray, g: np.ndarray, decay: bool, t: int) -> None:
    """In-place update of one parameter array."""
    if decay and state.l2_lambda:
        g = g + state.l2_lambda * w
    m = state.m.get(key)
    if m is None:
        m = state.m[key] = np.zeros_like(w)
        state.v[key] = np.zeros_like(w)
    v = state.v[key]
    m *= state.beta1
    m += (1.0 - state.beta1) * g
    v *= state.beta2
    v += (1.0 - state.beta2) * (g * g)
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    w -= (state.lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(w.dtype)


def adam_step(state: AdamState, model) -> None:
    """Apply one Adam step to every trainable group of ``model`` using its stored grads."""
    state.t += 1
    for gname, layer in model.groups().items():
        if not model.trainable[gname]:
            continue
        for pname, w in layer.params.items():
            adam_update(state, (gname, pname), w, layer.grads[pname], decays(layer, pname), state.t)
