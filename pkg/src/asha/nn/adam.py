"""Adam over flat lists of arrays (canonical constants beta1=0.9, beta2=0.999, eps=1e-8)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Array = np.ndarray

BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8


class NonFiniteGradientError(ValueError):
    pass


@dataclass
class AdamState:
    m: list[Array]
    v: list[Array]
    step: int

    @staticmethod
    def init(params: list[Array]) -> "AdamState":
        return AdamState(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            step=0,
        )


def adam_step(
    params: list[Array],
    grads: list[Array],
    state: AdamState,
    lr: float,
) -> tuple[list[Array], AdamState]:
    if lr <= 0:
        raise ValueError(f"lr must be positive, got {lr}")
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params/grads/state length mismatch")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ValueError(f"param shape {p.shape} != grad shape {g.shape}")
        if not np.isfinite(g).all():
            raise NonFiniteGradientError("non-finite gradient; update rejected")
    t = state.step + 1
    bc1 = 1.0 - BETA1**t
    bc2 = 1.0 - BETA2**t
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m = BETA1 * m + (1.0 - BETA1) * g
        v = BETA2 * v + (1.0 - BETA2) * np.square(g)
        update = (m / bc1) / (np.sqrt(v / bc2) + EPS)
        new_params.append((p - lr * update).astype(p.dtype, copy=False))
        new_m.append(m)
        new_v.append(v)
    return new_params, AdamState(new_m, new_v, t)
