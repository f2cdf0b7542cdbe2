"""Adam optimizer over named parameter collections.

Standard Adam with bias correction: m and v track exponential moving
averages of the gradient and its square, and the update is
p -= lr * m_hat / (sqrt(v_hat) + eps).  Moments are float32 to match
parameter storage; the shared step counter t drives bias correction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor

__all__ = ["BETA1", "BETA2", "EPS", "AdamState", "adam_state_for", "adam_step", "zero_grad"]

BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8


@dataclass
class AdamState:
    """First and second moments per parameter name, plus the step counter."""

    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


def adam_state_for(params: dict[str, Tensor]) -> AdamState:
    """Fresh zero-moment state shaped like the given parameters."""
    state = AdamState()
    for name, p in params.items():
        state.m[name] = np.zeros_like(p.data)
        state.v[name] = np.zeros_like(p.data)
    return state


def adam_step(params: dict[str, Tensor], state: AdamState, lr: float) -> None:
    """One in-place Adam update from the gradients stored on the parameters.

    Parameters whose grad is None are skipped entirely (their moments do not
    decay), matching the usual sparse-update convention.
    """
    state.t += 1
    bc1 = 1.0 - BETA1 ** state.t
    bc2 = 1.0 - BETA2 ** state.t
    for name, p in params.items():
        if p.grad is None:
            continue
        if name not in state.m:
            raise KeyError(f"no optimizer state for parameter {name!r}")
        g = p.grad
        m = state.m[name]
        v = state.v[name]
        m *= BETA1
        m += (1.0 - BETA1) * g
        v *= BETA2
        v += (1.0 - BETA2) * np.square(g)
        m_hat = m / bc1
        v_hat = v / bc2
        p.data -= np.float32(lr) * m_hat / (np.sqrt(v_hat) + np.float32(EPS))


def zero_grad(params: dict[str, Tensor]) -> None:
    for p in params.values():
        p.zero_grad()
