"""Adam with bias correction, step learning-rate decay and gradient clipping."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .tensor import ContractError


@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: Mapping[str, np.ndarray], **kwargs) -> "AdamState":
        state = cls(**kwargs)
        for name, p in params.items():
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        return state


def adam_step(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
) -> tuple[Mapping[str, np.ndarray], AdamState]:
    """One in-place Adam update of ``params``; returns ``(params, state)``."""
    if set(params) != set(state.m):
        raise ContractError("Adam state does not mirror the parameter set")
    for name, p in params.items():
        if name not in grads:
            raise ContractError(f"missing gradient for {name!r}")
        if grads[name].shape != p.shape:
            raise ContractError(
                f"gradient shape {grads[name].shape} != parameter shape {p.shape} for {name!r}"
            )
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1**t
    corr2 = 1.0 - b2**t
    for name, p in params.items():
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.lr * (m / corr1) / (np.sqrt(v / corr2) + state.eps)
    return params, state


@dataclass(frozen=True)
class LrSchedule:
    """Step decay: ``initial * factor ** floor(epoch / period)``, epochs from 0."""

    initial: float = 0.001
    factor: float = 0.1
    period: int = 30

    def rate(self, epoch: int) -> float:
        return self.initial * self.factor ** (epoch // self.period)


def clip_grad_norm(grads: Mapping[str, np.ndarray], max_norm: float | None) -> float:
    """Scale gradients in place so their global L2 norm is at most ``max_norm``.

    Returns the norm before clipping. ``max_norm=None`` only measures.
    """
    total = math.sqrt(float(np.sum([np.sum(g * g) for g in grads.values()])))
    if max_norm is not None and total > max_norm:
        scale = max_norm / (total + 1e-12)
        for g in grads.values():
            g *= scale
    return total
