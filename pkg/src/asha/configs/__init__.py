"""Named desk-scale configurations shipped with the package."""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from ..envs import EnvConfig
from ..pretrain import PretrainConfig


def _read(name: str) -> dict:
    path = resources.files(__package__) / f"{name}.json"
    if not path.is_file():
        raise KeyError(f"no packaged config named {name!r}")
    return json.loads(path.read_text())


def resolve_env_config(name_or_path: str) -> EnvConfig:
    """Accept a packaged config name ('switch_online') or a JSON file path."""
    p = Path(name_or_path)
    if p.suffix == ".json" and p.exists():
        return EnvConfig.from_dict(json.loads(p.read_text()))
    return EnvConfig.from_dict(_read(name_or_path))


def resolve_pretrain_config(name_or_path: str) -> PretrainConfig:
    p = Path(name_or_path)
    if p.suffix == ".json" and p.exists():
        return PretrainConfig.from_dict(json.loads(p.read_text()))
    return PretrainConfig.from_dict(_read(name_or_path))


def list_configs() -> list[str]:
    pkg = resources.files(__package__)
    return sorted(f.name[:-5] for f in pkg.iterdir() if f.name.endswith(".json"))
