from .encoder import InputEncoder, pog_aggregate, pog_backward, pog_reduce
from .loss import MatchingLossOut, matching_loss
from .relabel import (
    AttemptGroup,
    RelabeledDataset,
    TrainingPair,
    close_attempt_group,
    stack_pairs,
    trajectory_windows,
)
from .session import (
    AshaConfig,
    EpisodeResult,
    OnlineSession,
    calibrate,
    calibration_task_plan,
    generate_calibration_rollouts,
    interface_update,
    rollouts_to_pairs,
    run_episode,
    scripted_rollout,
)

__all__ = [
    "InputEncoder",
    "pog_aggregate",
    "pog_backward",
    "pog_reduce",
    "MatchingLossOut",
    "matching_loss",
    "AttemptGroup",
    "RelabeledDataset",
    "TrainingPair",
    "close_attempt_group",
    "stack_pairs",
    "trajectory_windows",
    "AshaConfig",
    "EpisodeResult",
    "OnlineSession",
    "calibrate",
    "calibration_task_plan",
    "generate_calibration_rollouts",
    "interface_update",
    "rollouts_to_pairs",
    "run_episode",
    "scripted_rollout",
]
