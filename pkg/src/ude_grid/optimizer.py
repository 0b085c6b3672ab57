"""Adam optimizer over a flat parameter vector.

Plain Adam with bias correction; no clipping, weight decay, or schedules.
``adam_step`` is a pure function: it returns a new state and a new
parameter vector and never mutates its inputs, so identical inputs give
bit-identical outputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_LR = 0.005
DEFAULT_BETA1 = 0.9
DEFAULT_BETA2 = 0.999
DEFAULT_EPS = 1e-8


@dataclass
class AdamState:
    """First/second moment estimates and the step counter."""

    m: np.ndarray
    v: np.ndarray
    step_count: int = 0
    lr: float = DEFAULT_LR
    beta1: float = DEFAULT_BETA1
    beta2: float = DEFAULT_BETA2
    eps: float = DEFAULT_EPS


def adam_init(param_len: int, lr: float = DEFAULT_LR) -> AdamState:
    """Fresh state: zero moments, step counter at zero."""
    if param_len < 1:
        raise ValueError("param_len must be >= 1")
    if lr <= 0.0:
        raise ValueError("lr must be strictly positive")
    return AdamState(m=np.zeros(param_len), v=np.zeros(param_len), lr=lr)


def adam_step(
    state: AdamState, theta: np.ndarray, grad: np.ndarray
) -> tuple[AdamState, np.ndarray]:
    """One Adam update; returns the successor state and updated parameters.

    m <- b1*m + (1-b1)*g;  v <- b2*v + (1-b2)*g^2
    theta <- theta - lr * (m/(1-b1^t)) / (sqrt(v/(1-b2^t)) + eps)
    """
    theta = np.asarray(theta, dtype=float)
    grad = np.asarray(grad, dtype=float)
    if theta.shape != grad.shape or theta.shape != state.m.shape:
        raise ValueError(
            f"length mismatch: theta {theta.shape}, grad {grad.shape}, state {state.m.shape}"
        )
    if not np.all(np.isfinite(grad)):
        raise ValueError("gradient contains non-finite entries")

    t = state.step_count + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_theta = theta - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)

    new_state = AdamState(
        m=m,
        v=v,
        step_count=t,
        lr=state.lr,
        beta1=state.beta1,
        beta2=state.beta2,
        eps=state.eps,
    )
    return new_state, new_theta
