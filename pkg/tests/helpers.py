"""Shared test oracles: finite differences and naive re-implementations.

Everything here is independent of the library's gradient code paths.
"""
from __future__ import annotations

import numpy as np


def finite_diff(f, arrays: list[np.ndarray], eps: float = 1e-5) -> list[np.ndarray]:
    """Central-difference gradient of scalar f(arrays) w.r.t. every entry, in float64."""
    arrays = [a.astype(np.float64) for a in arrays]
    grads = []
    for k, a in enumerate(arrays):
        g = np.zeros_like(a)
        flat = a.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = f(arrays)
            flat[i] = orig - eps
            lo = f(arrays)
            flat[i] = orig
            gflat[i] = (hi - lo) / (2.0 * eps)
        grads.append(g)
    return grads


def rel_err(a: np.ndarray, b: np.ndarray) -> float:
    """Max elementwise relative error with an absolute floor for near-zero entries."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-3)
    return float(np.max(np.abs(a - b) / denom))


def naive_mlp_forward(weights, biases, x):
    """Per-element loop oracle for a ReLU MLP; no vectorized matmul."""
    h = [float(v) for v in x]
    for li, (w, b) in enumerate(zip(weights, biases)):
        out = []
        for j in range(w.shape[1]):
            acc = float(b[j])
            for i in range(w.shape[0]):
                acc += h[i] * float(w[i, j])
            out.append(acc)
        if li < len(weights) - 1:
            out = [max(v, 0.0) for v in out]
        h = out
    return np.array(h)
