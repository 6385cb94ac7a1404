"""Four 2D manipulation domains behind one reset/step interface.

Dynamics are damped point masses on the unit workspace; the interesting part
is the task machinery: goal sampling, scene jitter that persists across
attempts, success/wrong-task predicates, shaped pre-training rewards, and
hindsight extraction of a goal descriptor from successful trajectories.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Literal

import numpy as np

from .config import EnvConfig

WORKSPACE = 1.0
SWITCH_COUNT = 5
SWITCH_SPACING = 0.22
SWITCH_Y = 0.8
ROW_JITTER = 0.3  # full interval width, shared by all switches
SHELF_SPACING = 0.3
SHELF_Y = 0.6
TABLE_JITTER = 0.4
DOOR_HANDLE_Y = 0.45
DOOR_COVER_HALF = 0.12
VALVE_TOL = math.pi / 16
VALVE_HOLD = 20
PUCK_GOAL_RADIUS = 0.05
PUCK_REWARD_ALPHA = 10.0
PUCK_REWARD_BETA = 2.0

ResetMode = Literal["scene_and_arm", "arm_only"]


class EnvKind(str, Enum):
    SWITCH = "switch"
    SHELF = "shelf"
    VALVE = "valve"
    PUCK = "puck"


@dataclass
class Task:
    kind: EnvKind
    target_index: int | None = None      # switch / shelf
    door_slot: int | None = None         # shelf: which compartment the door starts on
    initial_angle: float | None = None   # valve
    target_angle: float | None = None    # valve
    goal_pos: np.ndarray | None = None   # puck goal
    puck_start: np.ndarray | None = None # puck initial position

    @property
    def task_id(self):
        if self.kind in (EnvKind.SWITCH, EnvKind.SHELF):
            return int(self.target_index)
        if self.kind == EnvKind.VALVE:
            return round(float(self.target_angle), 6)
        return [round(float(v), 6) for v in self.goal_pos]


@dataclass
class TaskSpec:
    kind: EnvKind
    vector: np.ndarray  # 2D goal descriptor; (sin, cos) for valve

    def __post_init__(self) -> None:
        self.vector = np.asarray(self.vector, dtype=np.float32)
        if not np.isfinite(self.vector).all():
            raise ValueError("non-finite task spec")


@dataclass
class StepOutcome:
    state: "EnvState"
    reward: float
    success: bool = False
    wrong_task: bool = False
    step_limit: bool = False
    done: bool = False

    @property
    def outcome(self) -> str | None:
        if self.success:
            return "success"
        if self.wrong_task:
            return "wrong_task"
        if self.step_limit:
            return "step_limit"
        return None


def wrap_angle(a: float) -> float:
    return float(a % (2.0 * math.pi))


def angle_diff(a: float, b: float) -> float:
    """Signed shortest-arc difference a - b in (-pi, pi]."""
    d = (a - b) % (2.0 * math.pi)
    if d > math.pi:
        d -= 2.0 * math.pi
    return float(d)


@dataclass
class SwitchState:
    eff: np.ndarray
    vel: np.ndarray
    switches: np.ndarray          # (5, 2)
    pressed: np.ndarray           # (5,) bool
    row_jitter: float

    def obs(self) -> np.ndarray:
        return np.concatenate(
            [self.eff, self.vel, self.switches.ravel(), self.pressed.astype(np.float32)]
        ).astype(np.float32)

    def copy(self) -> "SwitchState":
        return SwitchState(
            self.eff.copy(), self.vel.copy(), self.switches.copy(),
            self.pressed.copy(), self.row_jitter,
        )

    def to_dict(self) -> dict:
        return {
            "eff": self.eff.tolist(), "vel": self.vel.tolist(),
            "switches": self.switches.tolist(),
            "pressed": self.pressed.astype(int).tolist(),
            "row_jitter": float(self.row_jitter),
        }

    @staticmethod
    def from_dict(d: dict) -> "SwitchState":
        return SwitchState(
            np.array(d["eff"], np.float64), np.array(d["vel"], np.float64),
            np.array(d["switches"], np.float64),
            np.array(d["pressed"], bool), d["row_jitter"],
        )


@dataclass
class ShelfState:
    eff: np.ndarray
    vel: np.ndarray
    targets: np.ndarray           # (2, 2)
    door_x: float
    reached: np.ndarray           # (2,) bool
    table_jitter: float

    @property
    def handle(self) -> np.ndarray:
        return np.array([self.door_x, DOOR_HANDLE_Y])

    def obs(self) -> np.ndarray:
        return np.concatenate(
            [self.eff, self.vel, self.targets.ravel(), [self.door_x], self.handle]
        ).astype(np.float32)

    def copy(self) -> "ShelfState":
        return ShelfState(
            self.eff.copy(), self.vel.copy(), self.targets.copy(),
            self.door_x, self.reached.copy(), self.table_jitter,
        )

    def to_dict(self) -> dict:
        return {
            "eff": self.eff.tolist(), "vel": self.vel.tolist(),
            "targets": self.targets.tolist(), "door_x": float(self.door_x),
            "reached": self.reached.astype(int).tolist(),
            "table_jitter": float(self.table_jitter),
        }

    @staticmethod
    def from_dict(d: dict) -> "ShelfState":
        return ShelfState(
            np.array(d["eff"], np.float64), np.array(d["vel"], np.float64),
            np.array(d["targets"], np.float64), d["door_x"],
            np.array(d["reached"], bool), d["table_jitter"],
        )


@dataclass
class ValveState:
    angle: float
    omega: float
    eff_angle: float

    def obs(self) -> np.ndarray:
        return np.array(
            [math.sin(self.angle), math.cos(self.angle), self.omega], dtype=np.float32
        )

    def copy(self) -> "ValveState":
        return ValveState(self.angle, self.omega, self.eff_angle)

    def to_dict(self) -> dict:
        return {
            "angle": float(self.angle), "omega": float(self.omega),
            "eff_angle": float(self.eff_angle),
        }

    @staticmethod
    def from_dict(d: dict) -> "ValveState":
        return ValveState(d["angle"], d["omega"], d["eff_angle"])


@dataclass
class PuckState:
    eff: np.ndarray
    vel: np.ndarray
    puck: np.ndarray
    puck_vel: np.ndarray

    def obs(self) -> np.ndarray:
        return np.concatenate([self.eff, self.vel, self.puck, self.puck_vel]).astype(
            np.float32
        )

    def copy(self) -> "PuckState":
        return PuckState(self.eff.copy(), self.vel.copy(), self.puck.copy(), self.puck_vel.copy())

    def to_dict(self) -> dict:
        return {
            "eff": self.eff.tolist(), "vel": self.vel.tolist(),
            "puck": self.puck.tolist(), "puck_vel": self.puck_vel.tolist(),
        }

    @staticmethod
    def from_dict(d: dict) -> "PuckState":
        return PuckState(
            np.array(d["eff"], np.float64), np.array(d["vel"], np.float64),
            np.array(d["puck"], np.float64), np.array(d["puck_vel"], np.float64),
        )


EnvState = SwitchState | ShelfState | ValveState | PuckState

STATE_CLASSES = {
    EnvKind.SWITCH: SwitchState,
    EnvKind.SHELF: ShelfState,
    EnvKind.VALVE: ValveState,
    EnvKind.PUCK: PuckState,
}

OBS_DIMS = {EnvKind.SWITCH: 19, EnvKind.SHELF: 11, EnvKind.VALVE: 3, EnvKind.PUCK: 8}
ACTION_DIMS = {EnvKind.SWITCH: 2, EnvKind.SHELF: 2, EnvKind.VALVE: 1, EnvKind.PUCK: 2}
SPEC_DIM = 2
LATENT_DIMS = {EnvKind.SWITCH: 3, EnvKind.SHELF: 3, EnvKind.VALVE: 2, EnvKind.PUCK: 4}


def sample_task(kind: EnvKind, task_config: dict, rng: np.random.Generator) -> Task:
    """Draw a ground-truth task from the configured distribution."""
    if kind == EnvKind.SWITCH:
        indices = task_config["indices"]
        if not indices:
            raise ValueError("empty switch index subset")
        return Task(kind, target_index=int(rng.choice(indices)))
    if kind == EnvKind.SHELF:
        targets = task_config["targets"]
        if not targets:
            raise ValueError("empty shelf target subset")
        target = int(rng.choice(targets))
        policy = task_config.get("door", "random")
        if policy == "random":
            slot = int(rng.integers(0, 2))
        elif policy == "never_cover":
            slot = 1 - target
        elif policy == "cover_target":
            slot = target
        else:
            raise ValueError(f"unknown door policy {policy!r}")
        return Task(kind, target_index=target, door_slot=slot)
    if kind == EnvKind.VALVE:
        initial = task_config.get("initial_angle")
        if initial is None:
            initial = float(rng.uniform(0.0, 2.0 * math.pi))
        target_set = task_config.get("target_set")
        if target_set:
            target = float(rng.choice(target_set))
        else:
            excl = float(task_config.get("exclusion", VALVE_TOL))
            # single draw from the admissible arc, so no rejection loop
            target = wrap_angle(initial + rng.uniform(excl, 2.0 * math.pi - excl))
        return Task(kind, initial_angle=float(initial), target_angle=target)
    half = np.array(task_config.get("half_extent", [0.25, 0.15]))
    min_sep = float(task_config.get("min_separation", 0.1))
    while True:
        puck = rng.uniform(-half, half)
        goal = rng.uniform(-half, half)
        if np.linalg.norm(puck - goal) >= min_sep:
            return Task(EnvKind.PUCK, goal_pos=goal, puck_start=puck)


class Env:
    """One task-conditioned environment instance. Stateful: owns scene + episode."""

    def __init__(self, config: EnvConfig):
        self.config = config
        self.kind = EnvKind(config.kind)
        self.task: Task | None = None
        self.state: EnvState | None = None
        self.t = 0
        self._hold = 0
        self._scene: dict | None = None

    @property
    def obs_dim(self) -> int:
        return OBS_DIMS[self.kind]

    @property
    def action_dim(self) -> int:
        return ACTION_DIMS[self.kind]

    def reset(self, task: Task, mode: ResetMode, rng: np.random.Generator) -> EnvState:
        if task.kind != self.kind:
            raise ValueError(f"task kind {task.kind} != env kind {self.kind}")
        if mode == "scene_and_arm" or self._scene is None:
            self.task = task
            self._scene = self._draw_scene(task, rng)
            self.state = None
        elif task is not self.task:
            raise ValueError("arm_only reset must reuse the current task")
        self.t = 0
        self._hold = 0
        self.state = self._initial_state(rng)
        return self.state.copy()

    def _draw_scene(self, task: Task, rng: np.random.Generator) -> dict:
        scale = self.config.jitter_scale
        if self.kind == EnvKind.SWITCH:
            return {"row_jitter": float(rng.uniform(-ROW_JITTER / 2, ROW_JITTER / 2) * scale)}
        if self.kind == EnvKind.SHELF:
            return {"table_jitter": float(rng.uniform(-TABLE_JITTER / 2, TABLE_JITTER / 2) * scale)}
        if self.kind == EnvKind.VALVE:
            return {"valve_x": float(rng.uniform(-0.05, 0.05) * scale)}
        return {"puck_start": np.array(task.puck_start, dtype=np.float64)}

    def _start_eff(self, rng: np.random.Generator) -> np.ndarray:
        c = np.array(self.config.start_center)
        h = np.array(self.config.start_half)
        return rng.uniform(c - h, c + h)

    def _initial_state(self, rng: np.random.Generator) -> EnvState:
        task, scene = self.task, self._scene
        if self.kind == EnvKind.SWITCH:
            xs = (np.arange(SWITCH_COUNT) - SWITCH_COUNT // 2) * SWITCH_SPACING
            switches = np.stack([xs + scene["row_jitter"], np.full(SWITCH_COUNT, SWITCH_Y)], axis=1)
            return SwitchState(
                eff=self._start_eff(rng), vel=np.zeros(2), switches=switches,
                pressed=np.zeros(SWITCH_COUNT, bool), row_jitter=scene["row_jitter"],
            )
        if self.kind == EnvKind.SHELF:
            xs = np.array([-SHELF_SPACING / 2, SHELF_SPACING / 2]) + scene["table_jitter"]
            targets = np.stack([xs, np.full(2, SHELF_Y)], axis=1)
            return ShelfState(
                eff=self._start_eff(rng), vel=np.zeros(2), targets=targets,
                door_x=float(xs[task.door_slot]), reached=np.zeros(2, bool),
                table_jitter=scene["table_jitter"],
            )
        if self.kind == EnvKind.VALVE:
            # retrying a task (arm_only) keeps the current valve angle: a wall
            # fixture does not spring back when the operator lets go
            angle = task.initial_angle if self.state is None else self.state.angle
            return ValveState(angle=wrap_angle(angle), omega=0.0, eff_angle=wrap_angle(angle))
        return PuckState(
            eff=self._start_eff(rng), vel=np.zeros(2),
            puck=scene["puck_start"].copy(), puck_vel=np.zeros(2),
        )

    def step(self, action: np.ndarray) -> StepOutcome:
        if self.state is None:
            raise RuntimeError("step before reset")
        action = np.asarray(action, dtype=np.float64).reshape(-1)
        if action.shape[0] != self.action_dim:
            raise ValueError(f"action dim {action.shape[0]} != {self.action_dim}")
        if not np.isfinite(action).all():
            raise ValueError("non-finite action")
        a = np.clip(action, -self.config.action_clip, self.config.action_clip)
        self.t += 1
        cfg = self.config
        success = wrong = False
        prev = self.state.copy() if self.kind == EnvKind.PUCK else None

        if self.kind == EnvKind.VALVE:
            st: ValveState = self.state
            st.omega = cfg.damping * st.omega + float(a[0])
            st.angle = wrap_angle(st.angle + cfg.dt * st.omega)
            st.eff_angle = st.angle
            if abs(angle_diff(st.angle, self.task.target_angle)) <= VALVE_TOL:
                self._hold += 1
            else:
                self._hold = 0
            success = self._hold >= VALVE_HOLD
        else:
            st = self.state
            old_eff = st.eff.copy()
            st.vel = cfg.damping * st.vel + a
            new_eff = st.eff + cfg.dt * st.vel
            clipped = np.clip(new_eff, -WORKSPACE, WORKSPACE)
            st.vel[clipped != new_eff] = 0.0
            st.eff = clipped

            if self.kind == EnvKind.SWITCH:
                d = np.linalg.norm(st.switches - st.eff, axis=1)
                hits = np.where((d <= cfg.contact_radius) & ~st.pressed)[0]
                for i in hits:
                    st.pressed[i] = True
                    if i == self.task.target_index:
                        success = True
                    else:
                        wrong = True
            elif self.kind == EnvKind.SHELF:
                if np.linalg.norm(old_eff - st.handle) <= cfg.grab_radius:
                    rail_lo, rail_hi = st.targets[0, 0], st.targets[1, 0]
                    st.door_x = float(np.clip(st.door_x + (st.eff[0] - old_eff[0]), rail_lo, rail_hi))
                d = np.linalg.norm(st.targets - st.eff, axis=1)
                for i in range(2):
                    if d[i] <= cfg.contact_radius and not door_covers(st, i) and not st.reached[i]:
                        st.reached[i] = True
                        if i == self.task.target_index:
                            success = True
                        else:
                            wrong = True
            else:  # puck
                delta = st.puck - st.eff
                dist = float(np.linalg.norm(delta))
                moved = np.zeros(2)
                if dist < cfg.push_radius:
                    normal = delta / dist if dist > 1e-9 else np.array([0.0, 1.0])
                    pushed = st.eff + normal * cfg.push_radius
                    pushed = np.clip(pushed, -WORKSPACE, WORKSPACE)
                    moved = pushed - st.puck
                    st.puck = pushed
                st.puck_vel = moved / cfg.dt
                success = float(np.linalg.norm(st.puck - self.task.goal_pos)) <= PUCK_GOAL_RADIUS

        if success:
            wrong = False
        if wrong and not cfg.end_on_wrong_task:
            wrong = False
        ends = (success and cfg.terminate_on_success) or wrong
        hit_limit = self.t >= cfg.step_limit and not ends
        reward = pretrain_reward(self.kind, self.state, self.task, prev_state=prev,
                                 shelf_shaping=cfg.shelf_shaping)
        return StepOutcome(
            state=self.state.copy(), reward=reward,
            success=success, wrong_task=wrong, step_limit=hit_limit,
            done=ends or hit_limit,
        )


def door_covers(state: ShelfState, target_index: int) -> bool:
    return abs(state.door_x - state.targets[target_index, 0]) < DOOR_COVER_HALF


def pretrain_reward(
    kind: EnvKind, state: EnvState, task: Task, prev_state: EnvState | None = None,
    shelf_shaping: float = 0.0,
) -> float:
    if kind == EnvKind.SWITCH:
        if state.pressed[task.target_index]:
            return 0.0
        d = float(np.linalg.norm(state.eff - state.switches[task.target_index]))
        return float(math.exp(-d - 0.2) - 1.0)
    if kind == EnvKind.SHELF:
        opened = not door_covers(state, task.target_index)
        reached = bool(state.reached[task.target_index])
        staged = -1.0 + 0.5 * opened + 0.5 * reached
        if shelf_shaping > 0.0 and not reached:
            # guidance toward the active subgoal: the handle while the door is in
            # the way, the bottle afterwards; vanishes at contact so the staged
            # anchor values are untouched
            subgoal = state.handle if not opened else state.targets[task.target_index]
            d = float(np.linalg.norm(state.eff - subgoal))
            staged += shelf_shaping * (math.exp(-d) - 1.0)
        return staged
    if kind == EnvKind.VALVE:
        d = abs(angle_diff(state.angle, task.target_angle))
        return float(math.exp(-5.0 * d) - 1.0)
    d_goal = float(np.linalg.norm(state.puck - task.goal_pos))
    d_tool = float(np.linalg.norm(state.eff - state.puck))
    if prev_state is None:
        delta = 0.0
    else:
        delta = (d_goal - float(np.linalg.norm(prev_state.puck - task.goal_pos))) + 0.5 * (
            d_tool - float(np.linalg.norm(prev_state.eff - prev_state.puck))
        )
    sig = 1.0 / (1.0 + math.exp(-PUCK_REWARD_ALPHA * delta))
    return float(1.0 - PUCK_REWARD_BETA * sig)


def success_predicate(kind: EnvKind, state_history: list[EnvState], task: Task) -> bool:
    if not state_history:
        raise ValueError("empty state history")
    last = state_history[-1]
    if kind == EnvKind.SWITCH:
        return bool(last.pressed[task.target_index])
    if kind == EnvKind.SHELF:
        return bool(last.reached[task.target_index])
    if kind == EnvKind.VALVE:
        if len(state_history) < VALVE_HOLD:
            return False
        return all(
            abs(angle_diff(s.angle, task.target_angle)) <= VALVE_TOL
            for s in state_history[-VALVE_HOLD:]
        )
    return float(np.linalg.norm(last.puck - task.goal_pos)) <= PUCK_GOAL_RADIUS


def extract_spec(trajectory) -> TaskSpec:
    """Hindsight goal descriptor from the final state actually reached."""
    if trajectory.outcome != "success":
        raise ValueError(f"cannot extract a spec from a {trajectory.outcome!r} trajectory")
    kind = trajectory.kind
    final = trajectory.final_state
    if kind in (EnvKind.SWITCH, EnvKind.SHELF):
        flags = final.pressed if kind == EnvKind.SWITCH else final.reached
        positions = final.switches if kind == EnvKind.SWITCH else final.targets
        hit = np.where(flags)[0]
        if hit.size == 0:
            raise ValueError("success trajectory without a triggered target")
        dists = np.linalg.norm(positions[hit] - final.eff, axis=1)
        return TaskSpec(kind, positions[hit[int(np.argmin(dists))]])
    if kind == EnvKind.VALVE:
        return TaskSpec(kind, np.array([math.sin(final.angle), math.cos(final.angle)]))
    return TaskSpec(kind, final.puck)
