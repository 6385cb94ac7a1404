"""Phase 1: autonomous pre-training of the latent-conditioned policy."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..envs import SPEC_DIM, Env, EnvConfig, EnvKind, Task, TaskSpec, sample_task
from ..nn import AdamState, adam_step, gaussian_head, mlp_forward, substream
from .model import PretrainedModel
from .sac import ReplayBuffer, actor_loss, critic_loss, polyak_update, sample_squashed


class PretrainDivergence(RuntimeError):
    pass


@dataclass
class PretrainConfig:
    epochs: int = 150
    steps_per_epoch: int = 1000
    train_steps_per_epoch: int = 1000
    start_steps: int = 1000
    batch: int = 256
    lr: float = 3e-4
    gamma: float = 0.99
    polyak: float = 5e-3
    beta: float = 0.01
    buffer_capacity: int = 200_000
    eval_episodes: int = 20
    stop_success: float | None = 0.95
    stop_patience: int = 2          # consecutive eval epochs at/above stop_success

    @staticmethod
    def from_dict(d: dict) -> "PretrainConfig":
        return PretrainConfig(**d)


def task_spec_vector(env: Env, task: Task) -> np.ndarray:
    """Ground-truth goal descriptor used for pre-training conditioning."""
    kind = env.kind
    if kind == EnvKind.SWITCH:
        return env.state.switches[task.target_index].astype(np.float32)
    if kind == EnvKind.SHELF:
        return env.state.targets[task.target_index].astype(np.float32)
    if kind == EnvKind.VALVE:
        return np.array([np.sin(task.target_angle), np.cos(task.target_angle)], np.float32)
    return np.asarray(task.goal_pos, np.float32)


def evaluate(model: PretrainedModel, env_config: EnvConfig, episodes: int,
             rng: np.random.Generator) -> float:
    """Mean-latent, mean-action rollouts; success rate over fresh task draws."""
    cfg = replace(env_config, terminate_on_success=True)
    env = Env(cfg)
    successes = 0
    for _ in range(episodes):
        task = sample_task(env.kind, cfg.task, rng)
        env.reset(task, "scene_and_arm", rng)
        spec = task_spec_vector(env, task)
        z = model.encode_spec(spec).mean
        for _ in range(cfg.step_limit):
            a = model.mean_action(env.state.obs(), z)
            out = env.step(a)
            if out.done:
                successes += out.success
                break
    return successes / episodes


@dataclass
class Optimizers:
    policy: AdamState
    encoder: AdamState
    critic: AdamState
    log_alpha: AdamState

    @staticmethod
    def init(model: PretrainedModel) -> "Optimizers":
        return Optimizers(
            policy=AdamState.init(model.policy.arrays()),
            encoder=AdamState.init(model.spec_encoder.arrays()),
            critic=AdamState.init(model.critic.arrays()),
            log_alpha=AdamState.init([model.log_alpha]),
        )


def train_step(model: PretrainedModel, buffer: ReplayBuffer, opt: Optimizers,
               cfg: PretrainConfig, rng: np.random.Generator) -> dict:
    batch = buffer.sample(cfg.batch, rng)
    c_out = critic_loss(model, batch, cfg.gamma, rng)
    if not np.isfinite(c_out.loss):
        raise PretrainDivergence(f"critic loss diverged: {c_out.loss}")
    new_c, opt.critic = adam_step(model.critic.arrays(), c_out.critic_grads.arrays(),
                                  opt.critic, cfg.lr)
    model.critic = model.critic.replace_arrays(new_c)

    a_out = actor_loss(model, batch, cfg.beta, rng,
                       target_entropy=-float(model.action_dim))
    if not np.isfinite(a_out.loss):
        raise PretrainDivergence(f"actor loss diverged: {a_out.loss}")
    new_p, opt.policy = adam_step(model.policy.arrays(), a_out.policy_grads.arrays(),
                                  opt.policy, cfg.lr)
    model.policy = model.policy.replace_arrays(new_p)
    new_e, opt.encoder = adam_step(model.spec_encoder.arrays(),
                                   a_out.encoder_grads.arrays(), opt.encoder, cfg.lr)
    model.spec_encoder = model.spec_encoder.replace_arrays(new_e)
    (new_la,), opt.log_alpha = adam_step([model.log_alpha], [a_out.log_alpha_grad],
                                         opt.log_alpha, cfg.lr)
    model.log_alpha = new_la

    polyak_update(model.critic_target, model.critic, cfg.polyak)
    return {"critic_loss": c_out.loss, "actor_loss": a_out.loss,
            "vib_kl": a_out.mean_kl, "alpha": float(np.exp(model.log_alpha))}


def pretrain(env_config: EnvConfig, cfg: PretrainConfig, seed: int,
             metrics_out: list | None = None,
             progress: bool = False) -> PretrainedModel:
    """Run SAC epochs until the evaluation success threshold holds or epochs run out."""
    kind = EnvKind(env_config.kind)
    init_rng = substream(seed, "init")
    model = PretrainedModel.init(kind, init_rng, beta=cfg.beta)
    opt = Optimizers.init(model)
    env = Env(env_config)
    buffer = ReplayBuffer(cfg.buffer_capacity, model.obs_dim, model.action_dim, SPEC_DIM)

    env_rng = substream(seed, "env")
    act_rng = substream(seed, "act")
    train_rng = substream(seed, "train")
    eval_seed = substream(seed, "evalseed").integers(0, 2**31)

    task = sample_task(kind, env_config.task, env_rng)
    env.reset(task, "scene_and_arm", env_rng)
    spec = task_spec_vector(env, task)
    z = _episode_latent(model, spec, act_rng)
    ep_return = 0.0
    returns: list[float] = []
    hits = 0

    for epoch in range(cfg.epochs):
        for _ in range(cfg.steps_per_epoch):
            obs = env.state.obs()
            pg = model.policy_dist(obs, z)
            a, _ = sample_squashed(pg, act_rng)
            out = env.step(a)
            # time-limit endings bootstrap; only real task completion is terminal
            terminal = out.success and env_config.terminate_on_success
            buffer.add(obs, a, out.reward, out.state.obs(), terminal, spec)
            ep_return += out.reward
            if out.done:
                returns.append(ep_return)
                ep_return = 0.0
                task = sample_task(kind, env_config.task, env_rng)
                env.reset(task, "scene_and_arm", env_rng)
                spec = task_spec_vector(env, task)
                z = _episode_latent(model, spec, act_rng)

        stats: dict = {}
        if buffer.size >= cfg.start_steps:
            for _ in range(cfg.train_steps_per_epoch):
                stats = train_step(model, buffer, opt, cfg, train_rng)

        eval_rate = evaluate(model, env_config, cfg.eval_episodes,
                             substream(eval_seed, "eval", epoch))
        record = {
            "epoch": epoch,
            "mean_return": float(np.mean(returns[-20:])) if returns else 0.0,
            "eval_success_rate": eval_rate,
            "vib_kl": stats.get("vib_kl", 0.0),
        }
        if metrics_out is not None:
            metrics_out.append(record)
        if progress:
            print(json.dumps(record, sort_keys=True), flush=True)

        hits = hits + 1 if (cfg.stop_success is not None and eval_rate >= cfg.stop_success) else 0
        if cfg.stop_success is not None and hits >= cfg.stop_patience:
            break
    return model


def _episode_latent(model: PretrainedModel, spec: np.ndarray,
                    rng: np.random.Generator) -> np.ndarray:
    """Training rollouts draw one latent per episode from the encoder posterior."""
    enc = model.encode_spec(spec)
    return enc.mean + np.exp(enc.log_std) * rng.standard_normal(enc.mean.shape).astype(
        enc.mean.dtype
    )
