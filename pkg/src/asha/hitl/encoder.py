"""Input encoders: map (state, user input) windows to latent posteriors.

Two variants: a feedforward encoder over the most recent step, and a deep-set
encoder that multiplies per-step Gaussian factors over a trailing window.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..nn import (
    DiagGaussian,
    MlpParams,
    gaussian_head,
    load_tensors,
    mlp_forward,
    mlp_init,
    save_tensors,
)

ENCODER_HIDDEN = 64


def pog_aggregate(factors: list[DiagGaussian]) -> DiagGaussian:
    """Precision-weighted product of diagonal Gaussians, renormalized."""
    if not factors:
        raise ValueError("empty factor list")
    dim = factors[0].dim
    for f in factors:
        if f.dim != dim:
            raise ValueError("factor dimension mismatch")
    means = np.stack([f.mean for f in factors])
    log_stds = np.stack([f.log_std for f in factors])
    mean, log_std = pog_reduce(means, log_stds)
    return DiagGaussian(mean, log_std)


def pog_reduce(means: np.ndarray, log_stds: np.ndarray,
               mask: np.ndarray | None = None, axis: int = 0):
    """PoG over `axis`. `mask` (broadcastable, 1=keep) supports ragged windows."""
    prec = np.exp(-2.0 * log_stds)
    if mask is not None:
        prec = prec * mask
    total = prec.sum(axis=axis)
    mean = (prec * means).sum(axis=axis) / total
    log_std = -0.5 * np.log(total)
    return mean, log_std


def pog_backward(means: np.ndarray, log_stds: np.ndarray, mask: np.ndarray | None,
                 g_mean: np.ndarray, g_log_std: np.ndarray, axis: int = 0):
    """Gradients of (mean, log_std) of the product w.r.t. per-factor means/log_stds."""
    prec = np.exp(-2.0 * log_stds)
    if mask is not None:
        prec = prec * mask
    total = prec.sum(axis=axis, keepdims=True)
    mean = (prec * means).sum(axis=axis, keepdims=True) / total
    gm = np.expand_dims(g_mean, axis)
    gls = np.expand_dims(g_log_std, axis)
    g_mean_i = gm * prec / total
    g_prec_i = gm * (means - mean) / total + gls * (-0.5 / total)
    g_log_std_i = g_prec_i * (-2.0 * prec)
    if mask is not None:
        g_mean_i = g_mean_i * mask
        g_log_std_i = g_log_std_i * mask
    return g_mean_i, g_log_std_i


@dataclass
class InputEncoder:
    params: MlpParams          # (obs + x) -> hidden -> 2d
    latent_dim: int
    window: int = 1            # 1 = feedforward; >1 = deep set over the trailing window

    @property
    def variant(self) -> str:
        return "feedforward" if self.window == 1 else "deepset"

    @property
    def in_dim(self) -> int:
        return self.params.in_dim

    @staticmethod
    def init(obs_dim: int, x_dim: int, latent_dim: int, rng: np.random.Generator,
             window: int = 1, dtype=np.float32,
             log_std_init: float = -1.5) -> "InputEncoder":
        params = mlp_init([obs_dim + x_dim, ENCODER_HIDDEN, 2 * latent_dim],
                          rng, dtype=dtype)
        # only the bottleneck term moves the log_std head, so its starting point
        # sets the execution-time sampling scale; start tight
        params.biases[-1][latent_dim:] += dtype(log_std_init)
        return InputEncoder(params=params, latent_dim=latent_dim, window=window)

    def copy(self) -> "InputEncoder":
        return InputEncoder(self.params.copy(), self.latent_dim, self.window)

    def step_factors(self, steps: np.ndarray) -> DiagGaussian:
        """Per-step Gaussian factors for (..., obs + x) inputs."""
        return gaussian_head(mlp_forward(self.params, steps))

    def posterior(self, window_steps: np.ndarray,
                  lengths: np.ndarray | None = None) -> DiagGaussian:
        """Posterior over z from a (B, W, obs+x) batch of trailing windows.

        `lengths` marks how many trailing steps are valid (early-episode windows
        are shorter); feedforward encoders use W = 1.
        """
        if window_steps.ndim == 2:
            window_steps = window_steps[None]
            squeeze = True
        else:
            squeeze = False
        B, W, _ = window_steps.shape
        fac = self.step_factors(window_steps)          # (B, W, d) heads
        mask = None
        if lengths is not None:
            idx = np.arange(W)[None, :]
            mask = (idx >= (W - lengths[:, None])).astype(window_steps.dtype)[..., None]
        mean, log_std = pog_reduce(fac.mean, fac.log_std, mask=mask, axis=1)
        if squeeze:
            mean, log_std = mean[0], log_std[0]
        return DiagGaussian(mean, log_std)

    def checksum(self) -> float:
        return float(sum(np.abs(a).sum() for a in self.params.arrays()))

    def save(self, path: str | Path) -> None:
        tensors = {"meta.latent_dim": np.array(self.latent_dim, np.float32),
                   "meta.window": np.array(self.window, np.float32)}
        for i, (w, b) in enumerate(zip(self.params.weights, self.params.biases)):
            tensors[f"enc.{i}.w"] = w
            tensors[f"enc.{i}.b"] = b
        save_tensors(path, tensors)

    @staticmethod
    def load(path: str | Path) -> "InputEncoder":
        t = load_tensors(path)
        ws, bs, i = [], [], 0
        while f"enc.{i}.w" in t:
            ws.append(t[f"enc.{i}.w"])
            bs.append(t[f"enc.{i}.b"])
            i += 1
        return InputEncoder(MlpParams(ws, bs), int(t["meta.latent_dim"]),
                            int(t["meta.window"]))
