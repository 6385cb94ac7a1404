"""Phase 2 orchestration: calibration, online episodes, and encoder updates."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..envs import Env, EnvConfig, EnvKind, Task, Trajectory, sample_task
from ..nn import AdamState, adam_step, substream
from ..pretrain import PretrainedModel
from ..pretrain.train import task_spec_vector
from ..users import DriftConfig, DriftState, UserModel, apply_drift, drift_begin_episode
from .encoder import InputEncoder
from .loss import matching_loss
from .relabel import AttemptGroup, RelabeledDataset, close_attempt_group

DEFAULT_ATTEMPT_CAP = 5
VALVE_ATTEMPT_CAP = 3


@dataclass
class AshaConfig:
    beta: float = 0.01
    lr: float = 5e-4
    batch: int = 256
    calibration_updates: int = 1000
    updates_per_success: int = 100
    batch_mix: tuple[int, int] | None = None   # calibration/online split, (128, 128)
    stochastic_execution: bool = True
    relabel_failures: bool = True
    loss_variant: str = "action_matching"
    attempt_cap: int = DEFAULT_ATTEMPT_CAP
    window: int = 1
    calibration_rollouts: int = 6

    @staticmethod
    def for_kind(kind: EnvKind) -> "AshaConfig":
        if kind == EnvKind.SWITCH:
            return AshaConfig()
        if kind == EnvKind.SHELF:
            return AshaConfig(calibration_rollouts=8)
        if kind == EnvKind.VALVE:
            return AshaConfig(stochastic_execution=False, attempt_cap=VALVE_ATTEMPT_CAP,
                              window=10, batch_mix=(128, 128), calibration_rollouts=7)
        return AshaConfig(stochastic_execution=False, window=20, batch_mix=(128, 128),
                          calibration_rollouts=8)

    @staticmethod
    def from_dict(d: dict) -> "AshaConfig":
        d = dict(d)
        if d.get("batch_mix") is not None:
            d["batch_mix"] = tuple(d["batch_mix"])
        return AshaConfig(**d)


def run_episode(
    encoder: InputEncoder | None,
    model: PretrainedModel,
    env: Env,
    user: UserModel,
    task: Task,
    cfg: AshaConfig,
    env_rng: np.random.Generator,
    user_rng: np.random.Generator,
    z_rng: np.random.Generator,
    reset_mode: str = "arm_only",
    drift_state: DriftState | None = None,
    latent_override: np.ndarray | None = None,
) -> Trajectory:
    """One attempt: encode inputs to latents, execute the frozen policy's mean action."""
    env.reset(task, reset_mode, env_rng)
    user.begin_episode()
    traj = Trajectory(env.kind)
    state = env.state.copy()
    window: list[np.ndarray] = []
    episode_z: np.ndarray | None = None
    d = model.latent_dim
    while True:
        obs = state.obs()
        x = user.generate(env.state, task, user_rng)
        if drift_state is not None:
            x = apply_drift(x, drift_state)
        if latent_override is not None:
            z = latent_override
        else:
            window.append(np.concatenate([obs, x]).astype(np.float32))
            if len(window) > cfg.window:
                window.pop(0)
            chunk = np.stack(window)
            if chunk.shape[0] < cfg.window:
                pad = np.zeros((cfg.window - chunk.shape[0], chunk.shape[1]), np.float32)
                chunk = np.concatenate([pad, chunk])
            post = encoder.posterior(chunk[None], lengths=np.array([len(window)]))
            mean, std = post.mean[0], np.exp(post.log_std[0])
            if cfg.loss_variant == "latent_regression":
                # one latent per episode so the regression target is well defined
                if episode_z is None:
                    episode_z = (
                        mean + std * z_rng.standard_normal(d).astype(np.float32)
                        if cfg.stochastic_execution else mean
                    )
                z = episode_z
            elif cfg.stochastic_execution:
                z = mean + std * z_rng.standard_normal(d).astype(np.float32)
            else:
                z = mean
        a = model.mean_action(obs, z)
        out = env.step(a)
        traj.append(state, x, a, out.reward)
        traj.executed_zs.append(np.asarray(z, np.float32))
        state = out.state
        if out.done:
            feedback = 1 if out.success else 0  # simulated users are truthful;
            traj.finish(state, out.outcome, feedback)  # step-limit feedback is automated
            return traj


def scripted_rollout(model: PretrainedModel, env: Env, user: UserModel, task: Task,
                     env_rng, user_rng) -> Trajectory:
    """Demonstration by the task-conditioned policy while the user watches."""
    env.reset(task, "scene_and_arm", env_rng)
    user.begin_episode()
    spec = task_spec_vector(env, task)
    z = model.encode_spec(spec).mean
    traj = Trajectory(env.kind)
    state = env.state.copy()
    while True:
        obs = state.obs()
        x = user.generate(env.state, task, user_rng)
        a = model.mean_action(obs, z)
        out = env.step(a)
        traj.append(state, x, a, out.reward)
        traj.executed_zs.append(np.asarray(z, np.float32))
        state = out.state
        if out.done:
            traj.finish(state, out.outcome, 1 if out.success else 0)
            return traj


def calibration_task_plan(kind: EnvKind, task_config: dict, total: int,
                          rng: np.random.Generator) -> list[Task]:
    """The fixed demonstration menu each domain calibrates on."""
    if kind == EnvKind.SWITCH:
        indices = task_config["indices"]
        per = max(1, total // len(indices))
        return [Task(kind, target_index=i) for i in indices for _ in range(per)]
    if kind == EnvKind.SHELF:
        targets = task_config["targets"]
        policy = task_config.get("door", "random")
        if policy == "never_cover":
            combos = [(t, 1 - t) for t in targets]
        else:
            combos = [(t, s) for t in targets for s in (0, 1)]
        per = max(1, total // len(combos))
        return [Task(kind, target_index=t, door_slot=s) for t, s in combos for _ in range(per)]
    if kind == EnvKind.VALVE:
        initial = task_config.get("initial_angle") or 0.0
        targets = task_config.get("target_set") or [
            np.pi / 4 * k for k in range(1, total + 1)
        ]
        return [Task(kind, initial_angle=initial, target_angle=float(t)) for t in targets]
    return [sample_task(kind, task_config, rng) for _ in range(total)]


def generate_calibration_rollouts(model: PretrainedModel, env_config: EnvConfig,
                                  user: UserModel, cfg: AshaConfig, seed: int,
                                  max_tries: int = 25) -> list[Trajectory]:
    env = Env(env_config)
    env_rng = substream(seed, "calib-env")
    user_rng = substream(seed, "calib-user")
    plan_rng = substream(seed, "calib-plan")
    rollouts = []
    for task in calibration_task_plan(env.kind, env_config.task, cfg.calibration_rollouts,
                                      plan_rng):
        for _ in range(max_tries):
            traj = scripted_rollout(model, env, user, task, env_rng, user_rng)
            if traj.outcome == "success":
                rollouts.append(traj)
                break
        else:
            raise RuntimeError(f"scripted policy kept failing task {task.task_id}")
    return rollouts


def rollouts_to_pairs(rollouts: list[Trajectory], cfg: AshaConfig):
    pairs = []
    for traj in rollouts:
        group = AttemptGroup(task=None, cap=cfg.attempt_cap)
        group.set_success(traj)
        pairs.extend(close_attempt_group(group, window=cfg.window))
    return pairs


def interface_update(encoder: InputEncoder, dataset: RelabeledDataset,
                     model: PretrainedModel, cfg: AshaConfig,
                     rng: np.random.Generator, opt: AdamState | None = None,
                     steps: int | None = None) -> AdamState:
    """Adam steps of the matching loss over all retained data."""
    if opt is None:
        opt = AdamState.init(encoder.params.arrays())
    for _ in range(cfg.updates_per_success if steps is None else steps):
        batch = dataset.sample(cfg.batch, rng, mix=cfg.batch_mix)
        out = matching_loss(encoder, model, batch, cfg.beta, cfg.loss_variant)
        new_arrays, opt = adam_step(encoder.params.arrays(), out.encoder_grads.arrays(),
                                    opt, cfg.lr)
        encoder.params = encoder.params.replace_arrays(new_arrays)
    return opt


def calibrate(encoder: InputEncoder, rollouts: list[Trajectory], model: PretrainedModel,
              cfg: AshaConfig, dataset: RelabeledDataset, rng: np.random.Generator,
              opt: AdamState | None = None) -> AdamState:
    """Supervised initialization on demonstration pairs; pairs stay in the dataset."""
    if not rollouts:
        raise ValueError("no calibration rollouts")
    dataset.add_calibration(rollouts_to_pairs(rollouts, cfg))
    return interface_update(encoder, dataset, model, cfg, rng, opt,
                            steps=cfg.calibration_updates)


@dataclass
class EpisodeResult:
    episode: int
    task_id: object
    attempt_index: int
    outcome: str
    feedback: int
    steps: int
    first_attempt: bool


class OnlineSession:
    """Algorithm loop: task -> attempts -> hindsight relabel -> encoder update."""

    def __init__(self, model: PretrainedModel, env_config: EnvConfig, user: UserModel,
                 cfg: AshaConfig, seed: int, *, frozen: bool = False,
                 random_latent: bool = False, drift_config: DriftConfig | None = None,
                 episode_hook: Callable | None = None):
        self.model = model
        self.env = Env(env_config)
        self.env_config = env_config
        self.user = user
        self.cfg = cfg
        self.frozen = frozen
        self.random_latent = random_latent
        self.task_rng = substream(seed, "task")
        self.env_rng = substream(seed, "env")
        self.user_rng = substream(seed, "user")
        self.z_rng = substream(seed, "z")
        self.train_rng = substream(seed, "train")
        self.latent_rng = substream(seed, "latent")
        self.dataset = RelabeledDataset()
        self.opt: AdamState | None = None
        self.encoder: InputEncoder | None = None
        if not random_latent:
            self.encoder = InputEncoder.init(self.env.obs_dim, user.input_dim,
                                             model.latent_dim, substream(seed, "encinit"),
                                             window=cfg.window)
        self.drift_config = drift_config
        self.drift_state = DriftState.init(user.input_dim) if drift_config else None
        self.drift_rng = substream(seed, "drift")
        self.group: AttemptGroup | None = None
        self.episode = 0
        self.episode_hook = episode_hook
        self.records: list[EpisodeResult] = []

    def run_calibration(self, rollouts: list[Trajectory] | None = None,
                        seed: int | None = None) -> None:
        if self.random_latent:
            return
        if rollouts is None:
            rollouts = generate_calibration_rollouts(
                self.model, self.env_config, self.user, self.cfg,
                seed if seed is not None else 10_000)
        self.opt = calibrate(self.encoder, rollouts, self.model, self.cfg,
                             self.dataset, self.train_rng, self.opt)

    def run_episode_once(self) -> EpisodeResult:
        if self.group is None:
            task = sample_task(self.env.kind, self.env_config.task, self.task_rng)
            self.group = AttemptGroup(task=task, cap=self.cfg.attempt_cap)
            reset_mode = "scene_and_arm"
        else:
            reset_mode = "arm_only"
        attempt_index = len(self.group.failures)
        if self.drift_config is not None:
            self.drift_state = drift_begin_episode(self.drift_state, self.drift_config,
                                                   self.drift_rng)
        latent_override = None
        if self.random_latent:
            latent_override = self.latent_rng.standard_normal(
                self.model.latent_dim).astype(np.float32)
        traj = run_episode(self.encoder, self.model, self.env, self.user,
                           self.group.task, self.cfg, self.env_rng, self.user_rng,
                           self.z_rng, reset_mode, self.drift_state, latent_override)
        task_id = self.group.task.task_id
        if traj.outcome == "success":
            self.group.set_success(traj)
            pairs = close_attempt_group(self.group, window=self.cfg.window,
                                        relabel_failures=self.cfg.relabel_failures)
            if not self.frozen and not self.random_latent:
                self.dataset.add_online(pairs)
                self.opt = interface_update(self.encoder, self.dataset, self.model,
                                            self.cfg, self.train_rng, self.opt)
            self.group = None
        else:
            self.group.add_failure(traj)
            if self.group.timed_out:
                self.group = None  # timed-out groups teach nothing
        result = EpisodeResult(
            episode=self.episode, task_id=task_id, attempt_index=attempt_index,
            outcome=traj.outcome, feedback=traj.feedback, steps=len(traj),
            first_attempt=attempt_index == 0,
        )
        self.records.append(result)
        self.episode += 1
        if self.episode_hook is not None:
            self.episode_hook(self, result)
        return result

    def run(self, episodes: int) -> list[EpisodeResult]:
        for _ in range(episodes):
            self.run_episode_once()
        return self.records
