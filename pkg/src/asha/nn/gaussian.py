"""Diagonal Gaussians: the shared currency for latent posteriors and action heads."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Array = np.ndarray

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
LOG_2PI = float(np.log(2.0 * np.pi))
TANH_EPS = 1e-6


@dataclass
class DiagGaussian:
    mean: Array
    log_std: Array

    def __post_init__(self) -> None:
        if self.mean.shape != self.log_std.shape:
            raise ValueError(
                f"mean shape {self.mean.shape} != log_std shape {self.log_std.shape}"
            )

    @property
    def std(self) -> Array:
        return np.exp(self.log_std)

    @property
    def dim(self) -> int:
        return self.mean.shape[-1]


def gaussian_head(raw: Array) -> DiagGaussian:
    """Split a network output of width 2n into (mean, clamped log_std)."""
    n = raw.shape[-1] // 2
    if raw.shape[-1] != 2 * n:
        raise ValueError("head width must be even")
    return DiagGaussian(raw[..., :n], np.clip(raw[..., n:], LOG_STD_MIN, LOG_STD_MAX))


def head_clamp_mask(raw: Array) -> Array:
    """1 where the log_std half of a head output passes its clamp, 0 where clipped."""
    n = raw.shape[-1] // 2
    ls = raw[..., n:]
    return ((ls > LOG_STD_MIN) & (ls < LOG_STD_MAX)).astype(raw.dtype)


def gaussian_sample(g: DiagGaussian, rng: np.random.Generator) -> tuple[Array, Array]:
    """Reparameterized draw; returns (sample, noise) so pathwise gradients stay available."""
    noise = rng.standard_normal(g.mean.shape).astype(g.mean.dtype, copy=False)
    return g.mean + np.exp(g.log_std) * noise, noise


def gaussian_log_prob(g: DiagGaussian, x: Array) -> Array:
    z = (x - g.mean) * np.exp(-g.log_std)
    return (-0.5 * np.square(z) - g.log_std - 0.5 * LOG_2PI).sum(axis=-1)


def kl_diag_gaussians(p: DiagGaussian, q: DiagGaussian) -> Array:
    """Closed-form KL(p || q), summed over the trailing axis."""
    if p.mean.shape[-1] != q.mean.shape[-1]:
        raise ValueError(f"dimension mismatch: {p.mean.shape[-1]} vs {q.mean.shape[-1]}")
    var_ratio = np.exp(2.0 * (p.log_std - q.log_std))
    mean_term = np.square(p.mean - q.mean) * np.exp(-2.0 * q.log_std)
    return 0.5 * (var_ratio + mean_term - 1.0).sum(axis=-1) + (
        q.log_std - p.log_std
    ).sum(axis=-1)


def kl_to_standard_normal(p: DiagGaussian) -> Array:
    """KL(p || N(0, I)); same closed form with q collapsed."""
    var = np.exp(2.0 * p.log_std)
    return 0.5 * (var + np.square(p.mean) - 1.0).sum(axis=-1) - p.log_std.sum(axis=-1)


def kl_to_standard_normal_grad(p: DiagGaussian) -> tuple[Array, Array]:
    """(d KL / d mean, d KL / d log_std) for KL(p || N(0, I))."""
    return p.mean.copy(), np.exp(2.0 * p.log_std) - 1.0


def tanh_squash(raw: Array, raw_log_prob: Array) -> tuple[Array, Array]:
    """Squash a raw Gaussian sample into (-1, 1) with the change-of-variables correction."""
    action = np.tanh(raw)
    corrected = raw_log_prob - np.log(1.0 - np.square(action) + TANH_EPS).sum(axis=-1)
    return action, corrected
