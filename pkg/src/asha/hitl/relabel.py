"""Hindsight relabeling: attempt groups and the dataset they train."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..envs import EnvKind, Task, TaskSpec, Trajectory, extract_spec


@dataclass
class TrainingPair:
    obs: np.ndarray          # (obs_dim,)
    window: np.ndarray       # (W, obs + x) trailing window ending at this step
    length: int              # valid steps in the window
    spec: np.ndarray         # (2,) relabeled goal descriptor
    executed_z: np.ndarray   # latent executed at this step (latent-regression target)


@dataclass
class AttemptGroup:
    """All consecutive attempts at one task: failures, then success or timeout."""

    task: Task
    cap: int = 5
    failures: list[Trajectory] = field(default_factory=list)
    terminal: Trajectory | None = None
    timed_out: bool = False

    def add_failure(self, traj: Trajectory) -> None:
        if self.closed:
            raise ValueError("attempt group already closed")
        self.failures.append(traj)
        if len(self.failures) >= self.cap:
            self.timed_out = True

    def set_success(self, traj: Trajectory) -> None:
        if self.closed:
            raise ValueError("attempt group already closed")
        if traj.outcome != "success":
            raise ValueError("terminal trajectory must be a success")
        self.terminal = traj

    @property
    def closed(self) -> bool:
        return self.timed_out or self.terminal is not None

    @property
    def attempts(self) -> int:
        return len(self.failures) + (1 if self.terminal is not None else 0)


def trajectory_windows(traj: Trajectory, window: int) -> list[tuple[np.ndarray, int]]:
    """Trailing (state, input) windows for every timestep, front-padded with zeros."""
    steps = np.stack(
        [np.concatenate([s.obs(), x]) for s, x in zip(traj.states, traj.inputs)]
    ).astype(np.float32)
    T, dim = steps.shape
    out = []
    for t in range(T):
        lo = max(0, t - window + 1)
        chunk = steps[lo : t + 1]
        length = chunk.shape[0]
        if length < window:
            chunk = np.concatenate([np.zeros((window - length, dim), np.float32), chunk])
        out.append((chunk, length))
    return out


def close_attempt_group(group: AttemptGroup, window: int = 1,
                        relabel_failures: bool = True) -> list[TrainingPair]:
    """Emit one pair per timestep of every trajectory, all carrying the success's
    goal descriptor. Timed-out groups teach nothing."""
    if not group.closed:
        raise ValueError("attempt group not yet terminated")
    if group.timed_out or group.terminal is None:
        return []
    spec = extract_spec(group.terminal)
    pairs: list[TrainingPair] = []
    sources = (group.failures if relabel_failures else []) + [group.terminal]
    for traj in sources:
        windows = trajectory_windows(traj, window)
        for t, (chunk, length) in enumerate(windows):
            z = traj.executed_zs[t] if traj.executed_zs else np.zeros(0, np.float32)
            pairs.append(TrainingPair(
                obs=traj.states[t].obs(), window=chunk, length=length,
                spec=spec.vector.copy(), executed_z=np.asarray(z, np.float32),
            ))
    return pairs


class RelabeledDataset:
    """Calibration and online partitions of relabeled pairs; never evicts."""

    def __init__(self) -> None:
        self.calibration: list[TrainingPair] = []
        self.online: list[TrainingPair] = []

    def __len__(self) -> int:
        return len(self.calibration) + len(self.online)

    def add_calibration(self, pairs: list[TrainingPair]) -> None:
        self.calibration.extend(pairs)

    def add_online(self, pairs: list[TrainingPair]) -> None:
        self.online.extend(pairs)

    def sample(self, batch: int, rng: np.random.Generator,
               mix: tuple[int, int] | None = None) -> list[TrainingPair]:
        """Uniform over everything, or a fixed calibration/online split when `mix`
        is set (falls back to calibration-only before the first success)."""
        if not len(self):
            raise ValueError("empty dataset")
        if mix is not None and self.online and self.calibration:
            n_cal, n_onl = mix
            cal_idx = rng.integers(0, len(self.calibration), size=n_cal)
            onl_idx = rng.integers(0, len(self.online), size=n_onl)
            return [self.calibration[i] for i in cal_idx] + [self.online[i] for i in onl_idx]
        pool = self.calibration + self.online
        idx = rng.integers(0, len(pool), size=batch)
        return [pool[i] for i in idx]


def stack_pairs(pairs: list[TrainingPair]):
    obs = np.stack([p.obs for p in pairs])
    windows = np.stack([p.window for p in pairs])
    lengths = np.array([p.length for p in pairs])
    spec = np.stack([p.spec for p in pairs])
    zs = np.stack([p.executed_z for p in pairs]) if pairs[0].executed_z.size else None
    return obs, windows, lengths, spec, zs
