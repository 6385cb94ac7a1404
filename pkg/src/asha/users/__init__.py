from .models import (
    DEFAULT_LAG_ALPHA,
    DIRECTIONAL_REMAIN_TOL,
    DYNAMIC_MAX_ARC,
    INPUT_DIMS,
    NOISY_GOAL_STD,
    DriftConfig,
    DriftState,
    UserModel,
    UserModelKind,
    apply_drift,
    drift_begin_episode,
    generate_input,
    lag_filter,
    puck_oracle_action,
)

__all__ = [
    "DEFAULT_LAG_ALPHA",
    "DIRECTIONAL_REMAIN_TOL",
    "DYNAMIC_MAX_ARC",
    "INPUT_DIMS",
    "NOISY_GOAL_STD",
    "DriftConfig",
    "DriftState",
    "UserModel",
    "UserModelKind",
    "apply_drift",
    "drift_begin_episode",
    "generate_input",
    "lag_filter",
    "puck_oracle_action",
]
