"""Full-batch GD and GD with momentum.

The momentum buffer follows the exponential-average convention

    g <- gamma * g + (1 - gamma) * grad
    W <- W - eta * g

so a step size ``eta`` here equals ``eta * (1 - gamma)`` in the heavy-ball form
``v <- gamma * v + grad; W <- W - lr * v`` used by most deep-learning frameworks.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class OptimizerState:
    eta: float
    gamma: float = 0.0
    g: np.ndarray | None = field(default=None, repr=False)
    step_count: int = 0

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"eta must be > 0, got {self.eta}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")

    @classmethod
    def zeros_like(cls, W: np.ndarray, eta: float, gamma: float = 0.0) -> OptimizerState:
        return cls(eta, gamma, np.zeros_like(W))


def _same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def gd_step(W: np.ndarray, grad: np.ndarray, eta: float) -> np.ndarray:
    _same_shape(W, grad)
    if not eta > 0:
        raise ValueError(f"eta must be > 0, got {eta}")
    return W - eta * grad


def gdm_step(W: np.ndarray, state: OptimizerState, grad: np.ndarray) -> tuple[np.ndarray, OptimizerState]:
    _same_shape(W, grad)
    g = state.g if state.g is not None else np.zeros_like(W)
    _same_shape(W, g)
    if state.gamma == 0.0:
        g_new = grad.copy()
    else:
        g_new = state.gamma * g + (1.0 - state.gamma) * grad
    new = OptimizerState(state.eta, state.gamma, g_new, state.step_count + 1)
    return W - state.eta * g_new, new


def reset_momentum(state: OptimizerState) -> OptimizerState:
    g = None if state.g is None else np.zeros_like(state.g)
    return OptimizerState(state.eta, state.gamma, g, state.step_count)
