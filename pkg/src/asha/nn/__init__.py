from .adam import AdamState, NonFiniteGradientError, adam_step
from .checkpoint import CheckpointError, load_tensors, save_tensors
from .gaussian import (
    LOG_STD_MAX,
    LOG_STD_MIN,
    DiagGaussian,
    gaussian_head,
    gaussian_log_prob,
    gaussian_sample,
    head_clamp_mask,
    kl_diag_gaussians,
    kl_to_standard_normal,
    kl_to_standard_normal_grad,
    tanh_squash,
)
from .mlp import (
    MlpParams,
    ShapeError,
    add_params,
    mlp_backward,
    mlp_forward,
    mlp_forward_cached,
    mlp_gradients,
    mlp_init,
    zeros_like_params,
)
from .rng import SeededRng, seeded_rng, substream

__all__ = [
    "AdamState",
    "NonFiniteGradientError",
    "adam_step",
    "CheckpointError",
    "load_tensors",
    "save_tensors",
    "LOG_STD_MAX",
    "LOG_STD_MIN",
    "DiagGaussian",
    "gaussian_head",
    "gaussian_log_prob",
    "gaussian_sample",
    "head_clamp_mask",
    "kl_diag_gaussians",
    "kl_to_standard_normal",
    "kl_to_standard_normal_grad",
    "tanh_squash",
    "MlpParams",
    "ShapeError",
    "add_params",
    "mlp_backward",
    "mlp_forward",
    "mlp_forward_cached",
    "mlp_gradients",
    "mlp_init",
    "zeros_like_params",
    "SeededRng",
    "seeded_rng",
    "substream",
]
