from .model import ENCODER_HIDDEN, POLICY_HIDDEN, PretrainedModel
from .sac import (
    Batch,
    ReplayBuffer,
    actor_loss,
    critic_loss,
    polyak_update,
    sample_squashed,
)
from .train import (
    Optimizers,
    PretrainConfig,
    PretrainDivergence,
    evaluate,
    pretrain,
    task_spec_vector,
    train_step,
)

__all__ = [
    "ENCODER_HIDDEN",
    "POLICY_HIDDEN",
    "PretrainedModel",
    "Batch",
    "ReplayBuffer",
    "actor_loss",
    "critic_loss",
    "polyak_update",
    "sample_squashed",
    "Optimizers",
    "PretrainConfig",
    "PretrainDivergence",
    "evaluate",
    "pretrain",
    "task_spec_vector",
    "train_step",
]
