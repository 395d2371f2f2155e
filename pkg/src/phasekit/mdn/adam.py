"""Adam with the classic bias-corrected update; state mutated in place."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(tensors: list[np.ndarray], lr: float = 1e-3) -> AdamState:
    return AdamState(
        m=[np.zeros_like(t) for t in tensors],
        v=[np.zeros_like(t) for t in tensors],
        lr=lr,
    )


def adam_step(tensors: list[np.ndarray], grads: list[np.ndarray], state: AdamState) -> None:
    """w -= lr * m_hat / (sqrt(v_hat) + eps); mutates tensors and state."""
    if len(tensors) != len(grads) or len(tensors) != len(state.m):
        raise ShapeError("tensors, grads, and state must have matching lengths")
    state.step += 1
    bc1 = 1.0 - state.beta1**state.step
    bc2 = 1.0 - state.beta2**state.step
    for w, g, m, v in zip(tensors, grads, state.m, state.v):
        if g.shape != w.shape:
            raise ShapeError(f"gradient shape {g.shape} does not match weight {w.shape}")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * np.square(g)
        w -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
