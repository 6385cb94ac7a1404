"""Tick-driven session state machine, independent of wall clock and transport.

The server owns timing and sockets; everything here is deterministic given the
seed and the per-tick consumed inputs, which is what makes log replay exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..envs import Env, EnvConfig, EnvKind, Task, Trajectory, sample_task
from ..hitl import (
    AshaConfig,
    AttemptGroup,
    InputEncoder,
    RelabeledDataset,
    calibrate,
    calibration_task_plan,
    close_attempt_group,
    interface_update,
    scripted_rollout,
)
from ..nn import AdamState, substream
from ..pretrain import PretrainedModel
from ..pretrain.train import task_spec_vector
from ..users import UserModel, UserModelKind
from .features import FeatureProjection
from .protocol import WireMessage
from ..experiments.metrics import EpisodeRecord, first_attempt_rate

DEFAULT_TICK_HZ = 15.0


def frame_geometry(kind: EnvKind, state, task: Task | None) -> dict[str, Any]:
    """Everything the operator's view needs; the client never simulates."""
    if kind == EnvKind.SWITCH:
        return {
            "kind": "switch",
            "effector": [float(v) for v in state.eff],
            "switches": [[float(v) for v in row] for row in state.switches],
            "pressed": state.pressed.astype(int).tolist(),
            "highlight": None if task is None else int(task.target_index),
        }
    if kind == EnvKind.SHELF:
        return {
            "kind": "shelf",
            "effector": [float(v) for v in state.eff],
            "targets": [[float(v) for v in row] for row in state.targets],
            "door_x": float(state.door_x),
            "handle": [float(v) for v in state.handle],
            "highlight": None if task is None else int(task.target_index),
        }
    if kind == EnvKind.VALVE:
        return {
            "kind": "valve",
            "angle": float(state.angle),
            "omega": float(state.omega),
            "target_angle": None if task is None else float(task.target_angle),
        }
    return {
        "kind": "puck",
        "effector": [float(v) for v in state.eff],
        "puck": [float(v) for v in state.puck],
        "goal": None if task is None else [float(v) for v in task.goal_pos],
    }


def task_prompt_text(kind: EnvKind, task: Task) -> str:
    if kind == EnvKind.SWITCH:
        return f"Flip the highlighted switch (#{task.target_index})"
    if kind == EnvKind.SHELF:
        return f"Reach the highlighted bottle (#{task.target_index})"
    if kind == EnvKind.VALVE:
        return f"Rotate the valve tip to the marked angle ({task.target_angle:.2f} rad)"
    return "Push the puck onto the marked goal"


@dataclass
class InputLogEntry:
    tick: int
    phase: str
    cursor: tuple[float, float] | None

    def to_dict(self) -> dict:
        return {"tick": self.tick, "phase": self.phase,
                "cursor": None if self.cursor is None else list(self.cursor)}


class SessionCore:
    def __init__(self, model: PretrainedModel, env_config: EnvConfig, cfg: AshaConfig,
                 seed: int, session_id: str = "s0", feature_dim: int = 32,
                 tick_hz: float = DEFAULT_TICK_HZ, max_episodes: int | None = None,
                 demo_provider=None):
        self.model = model
        self.env_config = env_config
        self.cfg = cfg
        self.seed = seed
        self.session_id = session_id
        self.tick_hz = tick_hz
        self.max_episodes = max_episodes
        self.env = Env(env_config)
        self.kind = self.env.kind
        self.projection = FeatureProjection(seed, feature_dim)
        self.encoder = InputEncoder.init(self.env.obs_dim, feature_dim, model.latent_dim,
                                         substream(seed, "encinit"), window=cfg.window)
        self.dataset = RelabeledDataset()
        self.opt: AdamState | None = None
        self.task_rng = substream(seed, "task")
        self.env_rng = substream(seed, "env")
        self.z_rng = substream(seed, "z")
        self.train_rng = substream(seed, "train")
        self.phase = "idle"
        self.tick_index = 0
        self.seq_out = 0
        self.last_input: tuple | None = None      # (x, y, buttons, seq)
        self.last_feedback_seq: int | None = None
        self.ever_received_input = False
        self.input_log: list[InputLogEntry] = []
        self.feedback_log: list[dict] = []
        self.records: list[EpisodeRecord] = []
        self.trajectories: list[Trajectory] = []
        self.episode = 0
        self.group: AttemptGroup | None = None
        self.pending_training: str | None = None   # "calibrate" | "success"
        self.demo_provider = demo_provider
        # calibration bookkeeping
        self._calib_plan: list[Task] = []
        self._calib_demos: list[Trajectory] = []
        self._demo_task: Task | None = None
        self._demo: Trajectory | None = None
        self._demo_step = 0
        self._demo_inputs: list[np.ndarray] = []
        self._demo_got_input = False
        self._recorded: list[Trajectory] = []
        # episode bookkeeping
        self._traj: Trajectory | None = None
        self._window: list[np.ndarray] = []
        self._state = None

    # ------------------------------------------------------------- helpers

    def _msg(self, mtype: str, payload: dict) -> WireMessage:
        self.seq_out += 1
        return WireMessage(mtype, self.session_id, self.seq_out, payload)

    def _error(self, text: str) -> WireMessage:
        return self._msg("error", {"message": text})

    def _state_frame(self, state, extra: dict | None = None) -> WireMessage:
        payload = {
            "t": self.tick_index,
            "phase": self.phase,
            "geometry": frame_geometry(self.kind, state,
                                       self.group.task if self.group else None),
        }
        if extra:
            payload.update(extra)
        return self._msg("state_frame", payload)

    def metrics(self) -> dict:
        return {
            "episodes": self.episode,
            "first_attempt_rate": first_attempt_rate(self.records),
            "dataset_calibration": len(self.dataset.calibration),
            "dataset_online": len(self.dataset.online),
        }

    # ------------------------------------------------------------- lifecycle

    def start(self) -> list[WireMessage]:
        if self.phase != "idle":
            return [self._error("already started")]
        if self.cfg.calibration_rollouts > 0:
            self._calib_plan = calibration_task_plan(
                self.kind, self.env_config.task, self.cfg.calibration_rollouts,
                substream(self.seed, "calib-plan"))
            self._next_demo()
            self.phase = "calibrating"
            return [self._msg("task_prompt", {"text": "Calibration: follow the robot "
                                              "with your cursor", "highlight": None})]
        self.phase = "episode_running"
        return self._begin_task()

    def _next_demo(self) -> None:
        index = len(self._calib_demos)
        task = self._calib_plan[index]
        self._demo_task = task
        if self.demo_provider is not None:
            self._demo = self.demo_provider(task, index)
        else:
            demo_env = Env(self.env_config)
            rng_env = substream(self.seed, "demo-env", index)
            for _ in range(25):
                traj = _scripted_demo(self.model, demo_env, task, rng_env)
                if traj.outcome == "success":
                    self._demo = traj
                    break
            else:
                raise RuntimeError("scripted demo failed repeatedly")
        self._demo_step = 0
        self._demo_inputs = []
        self._demo_got_input = False

    # ------------------------------------------------------------- inbound

    def on_input(self, msg: WireMessage) -> WireMessage | None:
        if msg.type != "input_frame":
            return self._error(f"unexpected message type {msg.type}")
        if self.phase not in ("calibrating", "episode_running"):
            return self._error(f"input ignored in phase {self.phase}")
        from .protocol import ProtocolError, validate_input_frame

        try:
            x, y, buttons = validate_input_frame(msg.payload)
        except ProtocolError as exc:
            return self._error(str(exc))
        if self.last_input is None or msg.seq >= self.last_input[3]:
            self.last_input = (x, y, buttons, msg.seq)
        self.ever_received_input = True
        return None

    def on_feedback(self, msg: WireMessage) -> list[WireMessage]:
        if self.last_feedback_seq is not None and msg.seq == self.last_feedback_seq:
            return []  # duplicate press: idempotent, even if the phase moved on
        if self.phase != "awaiting_feedback":
            return [self._error(f"feedback rejected in phase {self.phase}")]
        self.last_feedback_seq = msg.seq
        success = bool(msg.payload.get("success"))
        self.feedback_log.append({"tick": self.tick_index, "feedback": int(success)})
        return self._resolve_feedback(success)

    # ------------------------------------------------------------- tick

    def consume_input(self) -> tuple[float, float] | None:
        return None if self.last_input is None else (self.last_input[0], self.last_input[1])

    def tick(self, forced_cursor: tuple[float, float] | None | str = "live") -> list[WireMessage]:
        """Advance one tick. Replay passes the logged cursor via forced_cursor."""
        cursor = self.consume_input() if forced_cursor == "live" else forced_cursor
        if self.phase == "calibrating":
            self.tick_index += 1
            self.input_log.append(InputLogEntry(self.tick_index, "calibrating", cursor))
            return self._tick_calibrating(cursor)
        if self.phase == "episode_running":
            self.tick_index += 1
            self.input_log.append(InputLogEntry(self.tick_index, "episode_running", cursor))
            return self._tick_episode(cursor)
        if self.phase == "training":
            return [self._msg("train_status", {"pending": self.pending_training,
                                               "dataset": len(self.dataset)})]
        return []

    def _tick_calibrating(self, cursor) -> list[WireMessage]:
        feats = self.projection.project(cursor)
        if cursor is not None:
            self._demo_got_input = True
        self._demo_inputs.append(feats)
        state = self._demo.states[self._demo_step]
        # the operator needs to see what the demonstration is doing
        geometry = frame_geometry(self.kind, state, self._demo_task)
        self.seq_out += 1
        frame = WireMessage("state_frame", self.session_id, self.seq_out, {
            "t": self.tick_index, "phase": self.phase, "geometry": geometry,
            "demo": len(self._calib_demos),
        })
        self._demo_step += 1
        out: list[WireMessage] = [frame]
        if self._demo_step >= len(self._demo):
            if self._demo.outcome != "success":
                raise RuntimeError("calibration demos must be successful rollouts")
            if self._demo_got_input:
                recorded = Trajectory(self.kind)
                for s, x, a, r in zip(self._demo.states, self._demo_inputs,
                                      self._demo.actions, self._demo.rewards):
                    recorded.append(s, x, a, r)
                recorded.finish(self._demo.final_state, "success", 1)
                self._calib_demos.append(recorded)
            else:
                out.append(self._error("no input during rollout; repeating it"))
                self._next_demo()
                self.projection.reset()
                return out
            if len(self._calib_demos) >= len(self._calib_plan):
                self.phase = "training"
                self.pending_training = "calibrate"
                out.append(self._msg("train_status", {"pending": "calibrate",
                                                      "rollouts": len(self._calib_demos)}))
            else:
                self._next_demo()
                self.projection.reset()
        return out

    def _begin_task(self) -> list[WireMessage]:
        if self.max_episodes is not None and self.episode >= self.max_episodes:
            self.phase = "done"
            return [self._msg("metrics_frame", self.metrics())]
        task = sample_task(self.kind, self.env_config.task, self.task_rng)
        self.group = AttemptGroup(task=task, cap=self.cfg.attempt_cap)
        return self._begin_attempt("scene_and_arm")

    def _begin_attempt(self, reset_mode: str) -> list[WireMessage]:
        self.env.reset(self.group.task, reset_mode, self.env_rng)
        self.projection.reset()
        self._traj = Trajectory(self.kind)
        self._window = []
        self._state = self.env.state.copy()
        self.phase = "episode_running"
        return [
            self._msg("task_prompt", {
                "text": task_prompt_text(self.kind, self.group.task),
                "highlight": frame_geometry(self.kind, self._state, self.group.task).get(
                    "highlight"),
            }),
            self._state_frame(self._state),
        ]

    def _tick_episode(self, cursor) -> list[WireMessage]:
        warning = cursor is None and not self.ever_received_input
        feats = self.projection.project(cursor)
        obs = self._state.obs()
        step_vec = np.concatenate([obs, feats]).astype(np.float32)
        self._window.append(step_vec)
        if len(self._window) > self.cfg.window:
            self._window.pop(0)
        chunk = np.stack(self._window)
        if chunk.shape[0] < self.cfg.window:
            pad = np.zeros((self.cfg.window - chunk.shape[0], chunk.shape[1]), np.float32)
            chunk = np.concatenate([pad, chunk])
        post = self.encoder.posterior(chunk[None], lengths=np.array([len(self._window)]))
        mean, std = post.mean[0], np.exp(post.log_std[0])
        if self.cfg.stochastic_execution:
            z = mean + std * self.z_rng.standard_normal(self.model.latent_dim).astype(np.float32)
        else:
            z = mean
        a = self.model.mean_action(obs, z)
        out = self.env.step(a)
        self._traj.append(self._state, feats, a, out.reward)
        self._traj.executed_zs.append(np.asarray(z, np.float32))
        self._state = out.state
        frame = self._state_frame(out.state, {"warning": "no input yet"} if warning else None)
        msgs = [frame]
        if out.done:
            if out.step_limit and not out.success:
                # automated negative feedback on timeout; no button wait
                self._traj.finish(out.state, out.outcome, 0)
                self.feedback_log.append({"tick": self.tick_index, "feedback": 0,
                                          "automated": True})
                msgs.extend(self._resolve_feedback(False, automated=True))
            else:
                self._traj.finish(out.state, out.outcome, 0)  # bit patched on button
                self.phase = "awaiting_feedback"
                msgs.append(self._msg("task_prompt", {
                    "text": "Did the robot do what you wanted? (success/failure)",
                    "highlight": None}))
        return msgs

    def _resolve_feedback(self, success: bool, automated: bool = False) -> list[WireMessage]:
        traj = self._traj
        traj.feedback = int(success)
        if success and traj.outcome != "success":
            # operator overrides the automated detector: honor the button
            traj.outcome = "success"
        if not success and traj.outcome == "success" and not automated:
            traj.outcome = "wrong_task"
        self.trajectories.append(traj)
        attempt_index = len(self.group.failures)
        self.records.append(EpisodeRecord(
            variant="live", seed=self.seed, episode=self.episode,
            task_id=self.group.task.task_id, attempt_index=attempt_index,
            outcome=traj.outcome, feedback=traj.feedback,
            first_attempt=attempt_index == 0, steps=len(traj),
        ))
        self.episode += 1
        msgs: list[WireMessage] = [self._msg("metrics_frame", self.metrics())]
        if success:
            self.group.set_success(traj)
            pairs = close_attempt_group(self.group, window=self.cfg.window,
                                        relabel_failures=self.cfg.relabel_failures)
            self.dataset.add_online(pairs)
            self.group = None
            self.phase = "training"
            self.pending_training = "success"
            msgs.append(self._msg("train_status", {"pending": "success",
                                                   "pairs": len(pairs)}))
            return msgs
        self.group.add_failure(traj)
        if self.max_episodes is not None and self.episode >= self.max_episodes:
            self.group = None
            self.phase = "done"
            return msgs
        if self.group.timed_out:
            self.group = None
            msgs.extend(self._begin_task())
        else:
            msgs.extend(self._begin_attempt("arm_only"))
        return msgs

    # ------------------------------------------------------------- training

    def run_training_job(self) -> list[WireMessage]:
        """Blocking CPU work; the server calls this off the tick loop."""
        if self.phase != "training" or self.pending_training is None:
            return []
        job = self.pending_training
        if job == "calibrate":
            self.opt = calibrate(self.encoder, self._calib_demos, self.model, self.cfg,
                                 self.dataset, self.train_rng, self.opt)
        else:
            self.opt = interface_update(self.encoder, self.dataset, self.model, self.cfg,
                                        self.train_rng, self.opt)
        self.pending_training = None
        msgs = [self._msg("train_status", {"done": job, "dataset": len(self.dataset)})]
        msgs.extend(self._begin_task())
        return msgs


def _scripted_demo(model: PretrainedModel, env: Env, task: Task, env_rng) -> Trajectory:
    env.reset(task, "scene_and_arm", env_rng)
    spec = task_spec_vector(env, task)
    z = model.encode_spec(spec).mean
    traj = Trajectory(env.kind)
    state = env.state.copy()
    while True:
        obs = state.obs()
        a = model.mean_action(obs, z)
        out = env.step(a)
        traj.append(state, np.zeros(1, np.float32), a, out.reward)
        state = out.state
        if out.done:
            traj.finish(state, out.outcome, 1 if out.success else 0)
            return traj


def replay_log(model: PretrainedModel, env_config: EnvConfig, cfg: AshaConfig, seed: int,
               input_log: list[dict], feedback_log: list[dict],
               session_id: str = "s0", feature_dim: int = 32,
               max_episodes: int | None = None, demo_provider=None) -> SessionCore:
    """Re-run a session from its consumed-input log; deterministic end to end."""
    core = SessionCore(model, env_config, cfg, seed, session_id=session_id,
                       feature_dim=feature_dim, max_episodes=max_episodes,
                       demo_provider=demo_provider)
    core.start()
    feedback = {f["tick"]: f for f in feedback_log if not f.get("automated")}
    for entry in input_log:
        cursor = entry["cursor"]
        core.tick(forced_cursor=None if cursor is None else tuple(cursor))
        while core.phase == "training":
            core.run_training_job()
        fb = feedback.get(core.tick_index)
        if fb is not None and core.phase == "awaiting_feedback":
            core.on_feedback(WireMessage("feedback", session_id, 10_000_000 + core.tick_index,
                                         {"success": bool(fb["feedback"])}))
            while core.phase == "training":
                core.run_training_job()
    return core
