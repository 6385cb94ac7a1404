"""The eight evaluation variants: the full method, baselines, and ablations."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..envs import Env, EnvConfig, EnvKind, sample_task
from ..hitl import AshaConfig, EpisodeResult, OnlineSession, generate_calibration_rollouts
from ..nn import substream
from ..pretrain import (
    Optimizers,
    PretrainConfig,
    PretrainedModel,
    ReplayBuffer,
    sample_squashed,
    train_step,
)
from ..users import DriftConfig, UserModel

VARIANT_NAMES = (
    "asha",
    "random_latent",
    "non_adaptive",
    "det_input_enc",
    "det_pretrain_enc",
    "sac_scratch",
    "no_failure_relabel",
    "latent_regression",
)


@dataclass
class VariantSpec:
    name: str

    def __post_init__(self) -> None:
        if self.name not in VARIANT_NAMES:
            raise ValueError(f"unknown variant {self.name!r}")

    @property
    def needs_beta0_backbone(self) -> bool:
        return self.name == "det_pretrain_enc"

    @property
    def needs_backbone(self) -> bool:
        return self.name != "sac_scratch"

    def tweak_config(self, cfg: AshaConfig) -> AshaConfig:
        if self.name == "det_input_enc":
            return replace(cfg, stochastic_execution=False)
        if self.name == "no_failure_relabel":
            return replace(cfg, relabel_failures=False)
        if self.name == "latent_regression":
            return replace(cfg, loss_variant="latent_regression")
        return cfg


class ScratchSacSession:
    """Q3 baseline: SAC on (state, user input) from user feedback, no pre-training.

    Presents the same episode/record interface as OnlineSession.
    """

    def __init__(self, env_config: EnvConfig, user: UserModel, cfg: AshaConfig,
                 seed: int, grad_steps_per_episode: int = 100):
        self.env = Env(env_config)
        self.env_config = env_config
        self.user = user
        self.cfg = cfg
        kind = EnvKind(env_config.kind)
        obs_dim = self.env.obs_dim + user.input_dim
        self.model = PretrainedModel.init(kind, substream(seed, "scratch-init"),
                                          obs_dim=obs_dim)
        self.opt = Optimizers.init(self.model)
        self.buffer = ReplayBuffer(100_000, obs_dim, self.model.action_dim, 2)
        self.sac_cfg = PretrainConfig(batch=cfg.batch, lr=3e-4)
        self.grad_steps = grad_steps_per_episode
        self.task_rng = substream(seed, "task")
        self.env_rng = substream(seed, "env")
        self.user_rng = substream(seed, "user")
        self.act_rng = substream(seed, "act")
        self.train_rng = substream(seed, "train")
        self.group_failures = 0
        self.task = None
        self.episode = 0
        self.records: list[EpisodeResult] = []

    def run_calibration(self, rollouts=None, seed=None) -> None:
        pass  # nothing to calibrate: the interface trains only from feedback rewards

    def run_episode_once(self) -> EpisodeResult:
        if self.task is None:
            self.task = sample_task(self.env.kind, self.env_config.task, self.task_rng)
            self.group_failures = 0
            reset_mode = "scene_and_arm"
        else:
            reset_mode = "arm_only"
        self.env.reset(self.task, reset_mode, self.env_rng)
        self.user.begin_episode()
        attempt_index = self.group_failures
        transitions = []
        state = self.env.state.copy()
        while True:
            x = self.user.generate(self.env.state, self.task, self.user_rng)
            obs = np.concatenate([state.obs(), x]).astype(np.float32)
            pg = self.model.policy_dist(obs, np.zeros(self.model.latent_dim, np.float32))
            a, _ = sample_squashed(pg, self.act_rng)
            out = self.env.step(a)
            obs2 = np.concatenate([out.state.obs(), x]).astype(np.float32)
            transitions.append((obs, a, obs2, out.success, out.done))
            state = out.state
            if out.done:
                outcome = out.outcome
                break
        # sparse reward: the user's terminal feedback bit, zero elsewhere
        for obs, a, obs2, success, done in transitions:
            r = 1.0 if (done and success) else 0.0
            self.buffer.add(obs, a, r, obs2, done and success, np.zeros(2, np.float32))
        if self.buffer.size >= self.sac_cfg.batch:
            for _ in range(self.grad_steps):
                train_step(self.model, self.buffer, self.opt, self.sac_cfg, self.train_rng)
        task_id = self.task.task_id
        if outcome == "success":
            self.task = None
        else:
            self.group_failures += 1
            if self.group_failures >= self.cfg.attempt_cap:
                self.task = None
        result = EpisodeResult(
            episode=self.episode, task_id=task_id,
            attempt_index=attempt_index, outcome=outcome,
            feedback=1 if outcome == "success" else 0,
            steps=len(transitions), first_attempt=attempt_index == 0,
        )
        self.records.append(result)
        self.episode += 1
        return result

    def run(self, episodes: int) -> list[EpisodeResult]:
        for _ in range(episodes):
            self.run_episode_once()
        return self.records


def build_variant(
    spec: VariantSpec,
    pretrained: PretrainedModel | None,
    pretrained_beta0: PretrainedModel | None,
    online_env: EnvConfig,
    calib_env: EnvConfig,
    user: UserModel,
    cfg: AshaConfig,
    seed: int,
    drift_config: DriftConfig | None = None,
):
    """Assemble a runnable session plus its calibration routine."""
    cfg = spec.tweak_config(cfg)
    if spec.name == "sac_scratch":
        return ScratchSacSession(online_env, user, cfg, seed)
    if spec.name == "det_pretrain_enc":
        if pretrained_beta0 is None:
            raise ValueError("det_pretrain_enc needs a backbone pre-trained with beta=0")
        model = pretrained_beta0
    else:
        if pretrained is None:
            raise ValueError(f"variant {spec.name} needs a pre-trained backbone")
        model = pretrained
    session = OnlineSession(
        model, online_env, user, cfg, seed=seed,
        frozen=spec.name == "non_adaptive",
        random_latent=spec.name == "random_latent",
        drift_config=drift_config,
    )
    if spec.name != "random_latent":
        rollouts = generate_calibration_rollouts(model, calib_env, user, cfg,
                                                 seed=seed + 90_000)
        session.run_calibration(rollouts=rollouts)
    return session
