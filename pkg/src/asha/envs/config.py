"""Environment configuration, JSON in and out."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any


@dataclass
class EnvConfig:
    kind: str  # switch | shelf | valve | puck
    step_limit: int = 200
    dt: float = 0.05
    damping: float = 0.9
    action_clip: float = 0.25
    contact_radius: float = 0.05
    grab_radius: float = 0.04
    push_radius: float = 0.10
    jitter_scale: float = 1.0
    end_on_wrong_task: bool = True
    terminate_on_success: bool = True
    start_center: tuple[float, float] = (0.0, -0.4)
    start_half: tuple[float, float] = (0.5, 0.1)
    # distance shaping added to the staged shelf reward during pre-training only;
    # 0 keeps the plain staged form
    shelf_shaping: float = 0.0
    task: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in ("switch", "shelf", "valve", "puck"):
            raise ValueError(f"unknown env kind {self.kind!r}")
        if not self.task:
            self.task = default_task_config(self.kind)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["start_center"] = list(self.start_center)
        d["start_half"] = list(self.start_half)
        return d

    @staticmethod
    def from_dict(d: dict[str, Any]) -> "EnvConfig":
        d = dict(d)
        for key in ("start_center", "start_half"):
            if key in d:
                d[key] = tuple(d[key])
        return EnvConfig(**d)


def default_task_config(kind: str) -> dict[str, Any]:
    if kind == "switch":
        return {"indices": [0, 1, 2, 3, 4]}
    if kind == "shelf":
        return {"targets": [0, 1], "door": "random"}
    if kind == "valve":
        return {"initial_angle": None, "exclusion": math.pi / 16, "target_set": None}
    return {"half_extent": [0.25, 0.15], "min_separation": 0.1}


def load_env_config(path: str | Path) -> EnvConfig:
    return EnvConfig.from_dict(json.loads(Path(path).read_text()))


def save_env_config(path: str | Path, config: EnvConfig) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")
