from .config import EnvConfig, default_task_config, load_env_config, save_env_config
from .core import (
    ACTION_DIMS,
    LATENT_DIMS,
    OBS_DIMS,
    SPEC_DIM,
    VALVE_HOLD,
    VALVE_TOL,
    Env,
    EnvKind,
    EnvState,
    PuckState,
    ShelfState,
    StepOutcome,
    SwitchState,
    Task,
    TaskSpec,
    ValveState,
    angle_diff,
    door_covers,
    extract_spec,
    pretrain_reward,
    sample_task,
    success_predicate,
    wrap_angle,
)
from .trajectory import Trajectory, dump_jsonl, load_jsonl

__all__ = [
    "ACTION_DIMS",
    "LATENT_DIMS",
    "OBS_DIMS",
    "SPEC_DIM",
    "VALVE_HOLD",
    "VALVE_TOL",
    "Env",
    "EnvKind",
    "EnvState",
    "PuckState",
    "ShelfState",
    "StepOutcome",
    "SwitchState",
    "Task",
    "TaskSpec",
    "ValveState",
    "angle_diff",
    "door_covers",
    "extract_spec",
    "pretrain_reward",
    "sample_task",
    "success_predicate",
    "wrap_angle",
    "EnvConfig",
    "default_task_config",
    "load_env_config",
    "save_env_config",
    "Trajectory",
    "dump_jsonl",
    "load_jsonl",
]
