"""Synthetic operators: every simulated input channel the experiments use.

Models are stateless except the puck oracle's lag register; drift is a
separate wrapper that biases whole episodes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ..envs import EnvKind, Task, angle_diff
from ..envs.core import EnvState, PuckState, ShelfState, SwitchState, ValveState

NOISY_GOAL_STD = {EnvKind.SWITCH: 0.1, EnvKind.SHELF: 0.15}
VALVE_INPUT_STD = 0.2
DYNAMIC_MAX_ARC = math.pi / 8
DIRECTIONAL_REMAIN_TOL = math.pi / 16
DEFAULT_LAG_ALPHA = 0.99


class UserModelKind(str, Enum):
    NOISY_GOAL = "noisy_goal"
    VALVE_STATIC = "valve_static"
    VALVE_DYNAMIC = "valve_dynamic"
    VALVE_DIRECTIONAL = "valve_directional"
    PUCK_LAGGY_ORACLE = "puck_laggy_oracle"


INPUT_DIMS = {
    UserModelKind.NOISY_GOAL: 2,
    UserModelKind.VALVE_STATIC: 2,
    UserModelKind.VALVE_DYNAMIC: 2,
    UserModelKind.VALVE_DIRECTIONAL: 3,
    UserModelKind.PUCK_LAGGY_ORACLE: 2,
}

_COMPATIBLE = {
    UserModelKind.NOISY_GOAL: (EnvKind.SWITCH, EnvKind.SHELF),
    UserModelKind.VALVE_STATIC: (EnvKind.VALVE,),
    UserModelKind.VALVE_DYNAMIC: (EnvKind.VALVE,),
    UserModelKind.VALVE_DIRECTIONAL: (EnvKind.VALVE,),
    UserModelKind.PUCK_LAGGY_ORACLE: (EnvKind.PUCK,),
}


def lag_filter(prev_smoothed: np.ndarray, raw: np.ndarray, alpha: float,
               paper_prefactor: bool = False) -> np.ndarray:
    """Exponential smoothing. The opt-in prefactor divides by (1 - alpha), which
    blows magnitudes up by 1/(1-alpha) at equilibrium; off by default."""
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must be in [0, 1), got {alpha}")
    out = alpha * prev_smoothed + (1.0 - alpha) * raw
    if paper_prefactor:
        out = out / (1.0 - alpha)
    return out


def puck_oracle_action(state: PuckState, task: Task) -> np.ndarray:
    """Proportional controller: line up behind the puck, then push it to the goal."""
    to_goal = task.goal_pos - state.puck
    dist_goal = np.linalg.norm(to_goal)
    if dist_goal < 1e-9:
        return np.zeros(2)
    push_dir = to_goal / dist_goal
    standoff = state.puck - push_dir * 0.12
    rel = state.eff - state.puck
    behind = float(np.dot(rel, push_dir)) < -0.05
    lateral = abs(float(rel[0] * push_dir[1] - rel[1] * push_dir[0]))
    target_pt = task.goal_pos if (behind and lateral < 0.05) else standoff
    a = 4.0 * (target_pt - state.eff) - 0.4 * state.vel
    return np.clip(a, -0.25, 0.25)


@dataclass
class UserModel:
    kind: UserModelKind
    noise_std: float | None = None
    lag_alpha: float = DEFAULT_LAG_ALPHA
    lag_paper_prefactor: bool = False
    _lag_state: np.ndarray | None = field(default=None, repr=False)

    @property
    def input_dim(self) -> int:
        return INPUT_DIMS[self.kind]

    def begin_episode(self) -> None:
        self._lag_state = None

    def generate(self, state: EnvState, task: Task, rng: np.random.Generator) -> np.ndarray:
        if task.kind not in _COMPATIBLE[self.kind]:
            raise ValueError(f"user model {self.kind.value} incompatible with env {task.kind.value}")
        if self.kind == UserModelKind.NOISY_GOAL:
            if isinstance(state, SwitchState):
                goal = state.switches[task.target_index]
            elif isinstance(state, ShelfState):
                goal = state.targets[task.target_index]
            else:
                raise ValueError("noisy_goal needs a switch or shelf state")
            std = NOISY_GOAL_STD[task.kind] if self.noise_std is None else self.noise_std
            return (goal + rng.normal(0.0, std, size=2)).astype(np.float32)

        if self.kind in (UserModelKind.VALVE_STATIC, UserModelKind.VALVE_DYNAMIC):
            assert isinstance(state, ValveState)
            angle = task.target_angle
            if self.kind == UserModelKind.VALVE_DYNAMIC:
                step = np.clip(angle_diff(task.target_angle, state.angle),
                               -DYNAMIC_MAX_ARC, DYNAMIC_MAX_ARC)
                angle = state.angle + step
            std = VALVE_INPUT_STD if self.noise_std is None else self.noise_std
            point = np.array([math.sin(angle), math.cos(angle)])
            return (point + rng.normal(0.0, std, size=2)).astype(np.float32)

        if self.kind == UserModelKind.VALVE_DIRECTIONAL:
            assert isinstance(state, ValveState)
            diff = angle_diff(task.target_angle, state.angle)
            one_hot = np.zeros(3)
            if abs(diff) <= DIRECTIONAL_REMAIN_TOL:
                one_hot[2] = 1.0  # remain
            elif diff > 0:
                one_hot[1] = 1.0  # counter-clockwise
            else:
                one_hot[0] = 1.0  # clockwise
            std = VALVE_INPUT_STD if self.noise_std is None else self.noise_std
            return (one_hot + rng.normal(0.0, std, size=3)).astype(np.float32)

        assert isinstance(state, PuckState)
        raw = puck_oracle_action(state, task)
        if self._lag_state is None:
            self._lag_state = np.zeros_like(raw)
        self._lag_state = lag_filter(self._lag_state, raw, self.lag_alpha,
                                     self.lag_paper_prefactor)
        return self._lag_state.astype(np.float32)


def generate_input(model: UserModel, state: EnvState, task: Task,
                   rng: np.random.Generator) -> np.ndarray:
    return model.generate(state, task, rng)


@dataclass
class DriftConfig:
    walk_std: float = 0.0
    shift_episode: int | None = None
    shift_offset: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.walk_std < 0:
            raise ValueError("walk_std must be >= 0")


@dataclass
class DriftState:
    bias: np.ndarray
    episode: int = -1

    @staticmethod
    def init(dim: int) -> "DriftState":
        return DriftState(bias=np.zeros(dim), episode=-1)


def drift_begin_episode(state: DriftState, config: DriftConfig,
                        rng: np.random.Generator) -> DriftState:
    episode = state.episode + 1
    bias = state.bias.copy()
    if config.walk_std > 0:
        bias += rng.normal(0.0, config.walk_std, size=bias.shape)
    if config.shift_episode is not None and episode == config.shift_episode:
        bias += np.asarray(config.shift_offset, dtype=bias.dtype)
    return DriftState(bias=bias, episode=episode)


def apply_drift(x: np.ndarray, state: DriftState) -> np.ndarray:
    return (x + state.bias).astype(np.float32)
