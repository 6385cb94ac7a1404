"""Soft actor-critic update rules with an information bottleneck on the task latent.

All gradients are derived by hand and exercised against finite differences in
the test suite; losses accept frozen noise so those checks are exact.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..nn import (
    DiagGaussian,
    MlpParams,
    gaussian_head,
    head_clamp_mask,
    kl_to_standard_normal,
    mlp_backward,
    mlp_forward,
    mlp_forward_cached,
)
from ..nn.gaussian import LOG_2PI, TANH_EPS
from .model import PretrainedModel


@dataclass
class Batch:
    obs: np.ndarray
    act: np.ndarray
    rew: np.ndarray
    obs2: np.ndarray
    done: np.ndarray
    spec: np.ndarray

    def __len__(self) -> int:
        return self.obs.shape[0]


class ReplayBuffer:
    """Fixed-capacity FIFO ring with uniform sampling."""

    def __init__(self, capacity: int, obs_dim: int, act_dim: int, spec_dim: int):
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim), np.float32)
        self.act = np.zeros((capacity, act_dim), np.float32)
        self.rew = np.zeros(capacity, np.float32)
        self.obs2 = np.zeros((capacity, obs_dim), np.float32)
        self.done = np.zeros(capacity, np.float32)
        self.spec = np.zeros((capacity, spec_dim), np.float32)
        self.ptr = 0
        self.size = 0

    def add(self, obs, act, rew, obs2, done, spec) -> None:
        i = self.ptr
        self.obs[i], self.act[i], self.rew[i] = obs, act, rew
        self.obs2[i], self.done[i], self.spec[i] = obs2, float(done), spec
        self.ptr = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch: int, rng: np.random.Generator) -> Batch:
        idx = rng.integers(0, self.size, size=batch)
        return Batch(self.obs[idx], self.act[idx], self.rew[idx],
                     self.obs2[idx], self.done[idx], self.spec[idx])


def _tanh_logp_parts(mean: np.ndarray, log_std: np.ndarray, eps: np.ndarray):
    """Sample a = tanh(mean + std*eps) with its log-prob and raw intermediates."""
    raw = mean + np.exp(log_std) * eps
    a = np.tanh(raw)
    u = 1.0 - np.square(a) + TANH_EPS
    logp = (-0.5 * np.square(eps) - log_std - 0.5 * LOG_2PI).sum(axis=-1) - np.log(u).sum(axis=-1)
    return raw, a, u, logp


def sample_squashed(pg: DiagGaussian, rng: np.random.Generator):
    eps = rng.standard_normal(pg.mean.shape).astype(pg.mean.dtype)
    raw, a, _, logp = _tanh_logp_parts(pg.mean, pg.log_std, eps)
    return a, logp


@dataclass
class ActorLossOut:
    loss: float
    policy_grads: MlpParams
    encoder_grads: MlpParams
    log_alpha_grad: np.ndarray
    mean_logp: float
    mean_kl: float


def actor_loss(
    model: PretrainedModel,
    batch: Batch,
    beta: float,
    rng: np.random.Generator | None = None,
    target_entropy: float | None = None,
    eps_z: np.ndarray | None = None,
    eps_a: np.ndarray | None = None,
) -> ActorLossOut:
    """Entropy-regularized Q objective through a reparameterized action, at a latent
    sampled from the spec encoder, plus beta * KL(encoder || N(0, I)).

    Gradients flow into the policy and the encoder; critics stay fixed.
    """
    obs, spec = batch.obs, batch.spec
    B = len(batch)
    dtype = model.policy.weights[0].dtype
    d = model.latent_dim
    act_dim = model.action_dim
    if target_entropy is None:
        target_entropy = -float(act_dim)

    enc_raw, enc_cache = mlp_forward_cached(model.spec_encoder, spec)
    enc = gaussian_head(enc_raw)
    enc_mask = head_clamp_mask(enc_raw)
    if eps_z is None:
        eps_z = rng.standard_normal((B, d)).astype(dtype)
    sigma_e = np.exp(enc.log_std)
    z = enc.mean + sigma_e * eps_z

    pol_in = np.concatenate([obs, z], axis=-1)
    pol_raw, pol_cache = mlp_forward_cached(model.policy, pol_in)
    pg = gaussian_head(pol_raw)
    pol_mask = head_clamp_mask(pol_raw)
    if eps_a is None:
        eps_a = rng.standard_normal((B, act_dim)).astype(dtype)
    raw, a, u, logp = _tanh_logp_parts(pg.mean, pg.log_std, eps_a)

    q_in = np.concatenate([obs, a, spec], axis=-1)
    q_out, q_cache = mlp_forward_cached(model.critic, np.broadcast_to(q_in, (2,) + q_in.shape))
    q = q_out[..., 0]                       # (2, B)
    min_idx = np.argmin(q, axis=0)          # (B,)
    q_min = q[min_idx, np.arange(B)]

    alpha = float(np.exp(model.log_alpha))
    kl = kl_to_standard_normal(enc)
    loss = float(np.mean(alpha * logp - q_min) + beta * np.mean(kl))

    # ---- backward ----
    # dq_min/da through the critic input, routed through the argmin member only
    up_q = np.zeros((2, B, 1), dtype=dtype)
    up_q[min_idx, np.arange(B), 0] = 1.0
    _, q_in_grad = mlp_backward(model.critic, q_cache, up_q, need_param_grads=False)
    dq_da = q_in_grad.sum(axis=0)[:, model.obs_dim : model.obs_dim + act_dim]

    dlogp_draw = 2.0 * a * (1.0 - np.square(a)) / u
    da_draw = 1.0 - np.square(a)
    g_raw = (alpha * dlogp_draw - dq_da * da_draw) / B
    g_mu = g_raw
    g_ls = (g_raw * (raw - pg.mean) - alpha / B) * pol_mask
    up_pol = np.concatenate([g_mu, g_ls], axis=-1).astype(dtype)
    policy_grads, pol_in_grad = mlp_backward(model.policy, pol_cache, up_pol)
    g_z = pol_in_grad[:, model.obs_dim :]

    g_mu_e = g_z + (beta / B) * enc.mean
    g_ls_e = (g_z * (z - enc.mean) + (beta / B) * (np.exp(2.0 * enc.log_std) - 1.0)) * enc_mask
    up_enc = np.concatenate([g_mu_e, g_ls_e], axis=-1).astype(dtype)
    encoder_grads, _ = mlp_backward(model.spec_encoder, enc_cache, up_enc)

    # temperature: d/d log_alpha of -exp(log_alpha) * mean(logp + target_entropy), logp detached
    la_grad = np.asarray(-np.exp(model.log_alpha) * (np.mean(logp) + target_entropy),
                         dtype=dtype)

    return ActorLossOut(
        loss=loss, policy_grads=policy_grads, encoder_grads=encoder_grads,
        log_alpha_grad=la_grad, mean_logp=float(np.mean(logp)), mean_kl=float(np.mean(kl)),
    )


@dataclass
class CriticLossOut:
    loss: float
    critic_grads: MlpParams
    mean_q: float


def critic_loss(
    model: PretrainedModel,
    batch: Batch,
    gamma: float,
    rng: np.random.Generator | None = None,
    eps_a2: np.ndarray | None = None,
) -> CriticLossOut:
    """Twin-Q Bellman residual against min-target with entropy-augmented targets."""
    B = len(batch)
    dtype = model.critic.weights[0].dtype

    # target value (no gradients anywhere here)
    enc2 = gaussian_head(mlp_forward(model.spec_encoder, batch.spec))
    z2 = enc2.mean
    pg2 = gaussian_head(mlp_forward(model.policy, np.concatenate([batch.obs2, z2], axis=-1)))
    if eps_a2 is None:
        eps_a2 = rng.standard_normal(pg2.mean.shape).astype(dtype)
    _, a2, _, logp2 = _tanh_logp_parts(pg2.mean, pg2.log_std, eps_a2)
    tq = model.q_values(batch.obs2, a2, batch.spec, target=True)  # (2, B)
    alpha = float(np.exp(model.log_alpha))
    y = batch.rew + gamma * (1.0 - batch.done) * (tq.min(axis=0) - alpha * logp2)

    q_in = np.concatenate([batch.obs, batch.act, batch.spec], axis=-1)
    q_out, q_cache = mlp_forward_cached(model.critic, np.broadcast_to(q_in, (2,) + q_in.shape))
    td = q_out[..., 0] - y[None, :]
    loss = float(np.mean(np.square(td[0])) + np.mean(np.square(td[1])))

    up = (2.0 * td / B)[..., None].astype(dtype)
    critic_grads, _ = mlp_backward(model.critic, q_cache, up)
    return CriticLossOut(loss=loss, critic_grads=critic_grads, mean_q=float(q_out.mean()))


def polyak_update(target: MlpParams, online: MlpParams, tau: float) -> None:
    """In-place target <- tau * online + (1 - tau) * target."""
    for t, o in zip(target.arrays(), online.arrays()):
        t *= 1.0 - tau
        t += tau * o
