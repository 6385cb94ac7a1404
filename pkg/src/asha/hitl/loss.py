"""Interface-matching objective: push the input encoder's induced actions onto
the task-conditioned policy's actions, with a bottleneck toward the prior."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..nn import (
    DiagGaussian,
    gaussian_head,
    head_clamp_mask,
    kl_to_standard_normal,
    mlp_backward,
    mlp_forward,
    mlp_forward_cached,
)
from ..nn.mlp import MlpParams
from ..pretrain import PretrainedModel
from .encoder import InputEncoder, pog_backward, pog_reduce
from .relabel import TrainingPair, stack_pairs


@dataclass
class MatchingLossOut:
    loss: float
    encoder_grads: MlpParams
    action_mse: float
    kl: float


def window_mask(lengths: np.ndarray, W: int, dtype) -> np.ndarray:
    idx = np.arange(W)[None, :]
    return (idx >= (W - lengths[:, None])).astype(dtype)[..., None]


def matching_loss(
    encoder: InputEncoder,
    model: PretrainedModel,
    pairs: list[TrainingPair],
    beta: float,
    variant: str = "action_matching",
) -> MatchingLossOut:
    """Gradients w.r.t. the input encoder only; the backbone stays frozen."""
    obs, windows, lengths, spec, zs = stack_pairs(pairs)
    dtype = encoder.params.weights[0].dtype
    obs = obs.astype(dtype)
    windows = windows.astype(dtype)
    spec = spec.astype(dtype)
    B = obs.shape[0]
    W = windows.shape[1]
    d = encoder.latent_dim

    fac_raw, fac_cache = mlp_forward_cached(encoder.params, windows)
    fac = gaussian_head(fac_raw)
    clamp = head_clamp_mask(fac_raw)
    m = window_mask(lengths, W, dtype)
    mean_agg, ls_agg = pog_reduce(fac.mean, fac.log_std, mask=m, axis=1)
    kl = kl_to_standard_normal(DiagGaussian(mean_agg, ls_agg))
    mean_kl = float(np.mean(kl))

    if variant == "action_matching":
        pol_in = np.concatenate([obs, mean_agg], axis=-1)
        pol_raw, pol_cache = mlp_forward_cached(model.policy, pol_in)
        act_dim = model.action_dim
        a_inpt = np.tanh(pol_raw[..., :act_dim])
        z_star = gaussian_head(mlp_forward(model.spec_encoder, spec)).mean
        a_star = np.tanh(
            mlp_forward(model.policy, np.concatenate([obs, z_star], axis=-1))[..., :act_dim]
        )
        diff = a_inpt - a_star
        mse = float(np.mean(np.square(diff)))
        g_a = (2.0 / diff.size) * diff
        g_mu_p = g_a * (1.0 - np.square(a_inpt))
        up_pol = np.concatenate([g_mu_p, np.zeros_like(g_mu_p)], axis=-1).astype(dtype)
        _, pol_in_grad = mlp_backward(model.policy, pol_cache, up_pol,
                                      need_param_grads=False)
        g_z = pol_in_grad[:, model.obs_dim :]
    elif variant == "latent_regression":
        if zs is None or zs.shape[-1] != d:
            raise ValueError("latent_regression needs executed latents in the dataset")
        diff = mean_agg - zs.astype(dtype)
        mse = float(np.mean(np.square(diff)))
        g_z = (2.0 / diff.size) * diff
    else:
        raise ValueError(f"unknown loss variant {variant!r}")

    loss = mse + beta * mean_kl
    g_mean_agg = g_z + (beta / B) * mean_agg
    g_ls_agg = (beta / B) * (np.exp(2.0 * ls_agg) - 1.0)
    g_mu_i, g_ls_i = pog_backward(fac.mean, fac.log_std, m, g_mean_agg, g_ls_agg, axis=1)
    up_fac = np.concatenate([g_mu_i, g_ls_i * clamp], axis=-1).astype(dtype)
    encoder_grads, _ = mlp_backward(encoder.params, fac_cache, up_fac)
    return MatchingLossOut(loss=float(loss), encoder_grads=encoder_grads,
                           action_mse=mse, kl=mean_kl)
