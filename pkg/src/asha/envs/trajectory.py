"""Episode recordings: the unit that hindsight relabeling operates on."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO

import numpy as np

from .core import STATE_CLASSES, EnvKind, EnvState


@dataclass
class Trajectory:
    kind: EnvKind
    states: list[EnvState] = field(default_factory=list)      # s_0 .. s_{T-1}
    inputs: list[np.ndarray] = field(default_factory=list)    # x_0 .. x_{T-1}
    actions: list[np.ndarray] = field(default_factory=list)   # a_0 .. a_{T-1}
    rewards: list[float] = field(default_factory=list)
    final_state: EnvState | None = None                       # s_T
    outcome: str | None = None                                # success | wrong_task | step_limit
    feedback: int | None = None                               # user/automated success bit
    executed_zs: list[np.ndarray] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.states)

    def append(self, state: EnvState, x: np.ndarray, action: np.ndarray, reward: float) -> None:
        self.states.append(state)
        self.inputs.append(np.asarray(x, dtype=np.float32))
        self.actions.append(np.asarray(action, dtype=np.float32))
        self.rewards.append(float(reward))

    def finish(self, final_state: EnvState, outcome: str, feedback: int) -> None:
        if self.outcome is not None:
            raise ValueError("trajectory already finished")
        if not self.states:
            raise ValueError("empty trajectory")
        self.final_state = final_state
        self.outcome = outcome
        self.feedback = int(feedback)


def dump_jsonl(traj: Trajectory, out: IO[str] | str | Path) -> None:
    """One timestep per line: {t, state, input, action, reward, flags}."""
    own = isinstance(out, (str, Path))
    f = open(out, "w") if own else out
    try:
        n = len(traj)
        for t in range(n):
            last = t == n - 1
            line = {
                "t": t,
                "state": traj.states[t].to_dict(),
                "input": [float(v) for v in traj.inputs[t]],
                "action": [float(v) for v in traj.actions[t]],
                "reward": traj.rewards[t],
                "flags": {
                    "success": last and traj.outcome == "success",
                    "wrong_task": last and traj.outcome == "wrong_task",
                    "step_limit": last and traj.outcome == "step_limit",
                },
            }
            f.write(json.dumps(line, sort_keys=True) + "\n")
    finally:
        if own:
            f.close()


def load_jsonl(kind: EnvKind, src: IO[str] | str | Path) -> Trajectory:
    own = isinstance(src, (str, Path))
    f = open(src) if own else src
    try:
        traj = Trajectory(kind)
        cls = STATE_CLASSES[kind]
        outcome = None
        for raw in f:
            raw = raw.strip()
            if not raw:
                continue
            line = json.loads(raw)
            traj.append(
                cls.from_dict(line["state"]),
                np.array(line["input"], np.float32),
                np.array(line["action"], np.float32),
                line["reward"],
            )
            for name, hit in line["flags"].items():
                if hit:
                    outcome = name
        traj.outcome = outcome
        return traj
    finally:
        if own:
            f.close()
