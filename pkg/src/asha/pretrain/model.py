"""The pre-trained backbone: spec encoder, latent-conditioned policy, twin critics."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..envs import ACTION_DIMS, LATENT_DIMS, OBS_DIMS, SPEC_DIM, EnvKind
from ..nn import (
    DiagGaussian,
    MlpParams,
    gaussian_head,
    load_tensors,
    mlp_forward,
    mlp_init,
    save_tensors,
)

ENCODER_HIDDEN = 64
POLICY_HIDDEN = 256


@dataclass
class PretrainedModel:
    kind: EnvKind
    spec_encoder: MlpParams
    policy: MlpParams
    critic: MlpParams         # ensemble axis 2: both Q networks in one parameter set
    critic_target: MlpParams
    log_alpha: np.ndarray     # scalar
    beta: float
    obs_dim: int
    action_dim: int
    latent_dim: int

    @staticmethod
    def init(kind: EnvKind, rng: np.random.Generator, beta: float = 0.01,
             dtype=np.float32, obs_dim: int | None = None,
             action_dim: int | None = None,
             latent_dim: int | None = None) -> "PretrainedModel":
        obs = OBS_DIMS[kind] if obs_dim is None else obs_dim
        act = ACTION_DIMS[kind] if action_dim is None else action_dim
        d = LATENT_DIMS[kind] if latent_dim is None else latent_dim
        spec_encoder = mlp_init([SPEC_DIM, ENCODER_HIDDEN, 2 * d], rng, dtype=dtype)
        policy = mlp_init([obs + d, POLICY_HIDDEN, POLICY_HIDDEN, 2 * act], rng, dtype=dtype)
        critic = mlp_init([obs + act + SPEC_DIM, POLICY_HIDDEN, POLICY_HIDDEN, 1],
                          rng, dtype=dtype, ensemble=2)
        return PretrainedModel(
            kind=kind, spec_encoder=spec_encoder, policy=policy,
            critic=critic, critic_target=critic.copy(),
            log_alpha=np.zeros((), dtype=dtype), beta=beta,
            obs_dim=obs, action_dim=act, latent_dim=d,
        )

    def encode_spec(self, spec: np.ndarray) -> DiagGaussian:
        return gaussian_head(mlp_forward(self.spec_encoder, spec))

    def policy_dist(self, obs: np.ndarray, z: np.ndarray) -> DiagGaussian:
        return gaussian_head(mlp_forward(self.policy, np.concatenate([obs, z], axis=-1)))

    def mean_action(self, obs: np.ndarray, z: np.ndarray) -> np.ndarray:
        """Deterministic low-level action: tanh of the policy head mean."""
        return np.tanh(self.policy_dist(obs, z).mean)

    def optimal_action_dist(self, obs: np.ndarray, spec: np.ndarray) -> DiagGaussian:
        """Action distribution of the task-conditioned policy at the encoder's mean latent."""
        z = self.encode_spec(spec).mean
        return self.policy_dist(obs, z)

    def optimal_mean_action(self, obs: np.ndarray, spec: np.ndarray) -> np.ndarray:
        return np.tanh(self.optimal_action_dist(obs, spec).mean)

    def q_values(self, obs: np.ndarray, act: np.ndarray, spec: np.ndarray,
                 target: bool = False) -> np.ndarray:
        net = self.critic_target if target else self.critic
        x = np.concatenate([obs, act, spec], axis=-1)
        return mlp_forward(net, np.broadcast_to(x, (2,) + x.shape))[..., 0]

    def checksums(self) -> dict[str, float]:
        """Cheap content fingerprints; used to verify the backbone stays frozen."""
        return {
            "spec_encoder": float(sum(np.abs(a).sum() for a in self.spec_encoder.arrays())),
            "policy": float(sum(np.abs(a).sum() for a in self.policy.arrays())),
        }

    # ---------------------------------------------------------------- checkpoint IO

    def to_tensors(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {
            "meta.kind": np.array(list(EnvKind).index(self.kind), dtype=np.float32),
            "meta.beta": np.array(self.beta, dtype=np.float32),
            "meta.dims": np.array([self.obs_dim, self.action_dim, self.latent_dim],
                                  dtype=np.float32),
            "log_alpha": np.asarray(self.log_alpha, dtype=np.float32),
        }
        for name, net in (("spec_encoder", self.spec_encoder), ("policy", self.policy),
                          ("critic", self.critic), ("critic_target", self.critic_target)):
            for i, (w, b) in enumerate(zip(net.weights, net.biases)):
                out[f"{name}.{i}.w"] = w
                out[f"{name}.{i}.b"] = b
        return out

    def save(self, path: str | Path) -> None:
        save_tensors(path, self.to_tensors())

    @staticmethod
    def load(path: str | Path) -> "PretrainedModel":
        t = load_tensors(path)
        kind = list(EnvKind)[int(t["meta.kind"])]

        def net(name: str) -> MlpParams:
            ws, bs, i = [], [], 0
            while f"{name}.{i}.w" in t:
                ws.append(t[f"{name}.{i}.w"])
                bs.append(t[f"{name}.{i}.b"])
                i += 1
            return MlpParams(ws, bs)

        if "meta.dims" in t:
            dims = [int(v) for v in t["meta.dims"]]
        else:
            dims = [OBS_DIMS[kind], ACTION_DIMS[kind], LATENT_DIMS[kind]]
        return PretrainedModel(
            kind=kind, spec_encoder=net("spec_encoder"), policy=net("policy"),
            critic=net("critic"), critic_target=net("critic_target"),
            log_alpha=t["log_alpha"].reshape(()), beta=float(t["meta.beta"]),
            obs_dim=dims[0], action_dim=dims[1], latent_dim=dims[2],
        )
