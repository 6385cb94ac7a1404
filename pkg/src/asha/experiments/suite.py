"""Suite driver: variants x seeds, shift experiments, deterministic logs."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

from ..envs import EnvConfig, EnvKind
from ..hitl import AshaConfig
from ..pretrain import PretrainedModel
from ..users import DriftConfig, UserModel, UserModelKind
from .metrics import EpisodeRecord, Summary, summarize, windowed_rate
from .variants import VariantSpec, build_variant


@dataclass
class SuiteConfig:
    name: str
    online_env: EnvConfig
    calib_env: EnvConfig
    user_model: str
    asha: AshaConfig
    episodes: int = 100
    variants: tuple[str, ...] = ("asha",)
    seeds: tuple[int, ...] = tuple(range(1, 11))
    pretrained: str | None = None          # checkpoint path
    pretrained_beta0: str | None = None
    user_noise_std: float | None = None
    drift: dict | None = None              # DriftConfig fields

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "online_env": self.online_env.to_dict(),
            "calib_env": self.calib_env.to_dict(),
            "user_model": self.user_model,
            "asha": {**self.asha.__dict__,
                     "batch_mix": list(self.asha.batch_mix) if self.asha.batch_mix else None},
            "episodes": self.episodes,
            "variants": list(self.variants),
            "seeds": list(self.seeds),
            "pretrained": self.pretrained,
            "pretrained_beta0": self.pretrained_beta0,
            "user_noise_std": self.user_noise_std,
            "drift": self.drift,
        }

    @staticmethod
    def from_dict(d: dict) -> "SuiteConfig":
        return SuiteConfig(
            name=d["name"],
            online_env=EnvConfig.from_dict(d["online_env"]),
            calib_env=EnvConfig.from_dict(d["calib_env"]),
            user_model=d["user_model"],
            asha=AshaConfig.from_dict(d["asha"]),
            episodes=d.get("episodes", 100),
            variants=tuple(d.get("variants", ("asha",))),
            seeds=tuple(d.get("seeds", range(1, 11))),
            pretrained=d.get("pretrained"),
            pretrained_beta0=d.get("pretrained_beta0"),
            user_noise_std=d.get("user_noise_std"),
            drift=d.get("drift"),
        )

    @staticmethod
    def load(path: str | Path) -> "SuiteConfig":
        return SuiteConfig.from_dict(json.loads(Path(path).read_text()))


def _make_user(cfg: SuiteConfig) -> UserModel:
    return UserModel(UserModelKind(cfg.user_model), noise_std=cfg.user_noise_std)


def run_session(cfg: SuiteConfig, variant: str, seed: int) -> list[EpisodeRecord]:
    """One (variant, seed) cell, deterministic given its arguments."""
    spec = VariantSpec(variant)
    pretrained = PretrainedModel.load(cfg.pretrained) if (
        spec.needs_backbone and cfg.pretrained) else None
    beta0 = PretrainedModel.load(cfg.pretrained_beta0) if (
        spec.needs_beta0_backbone and cfg.pretrained_beta0) else None
    drift = DriftConfig(**cfg.drift) if cfg.drift else None
    session = build_variant(spec, pretrained, beta0, cfg.online_env, cfg.calib_env,
                            _make_user(cfg), cfg.asha, seed, drift_config=drift)
    results = session.run(cfg.episodes)
    return [
        EpisodeRecord(
            variant=variant, seed=seed, episode=r.episode, task_id=r.task_id,
            attempt_index=r.attempt_index, outcome=r.outcome, feedback=r.feedback,
            first_attempt=r.first_attempt, steps=r.steps,
        )
        for r in results
    ]


def _cell(args) -> tuple[str, int, list[dict] | str]:
    cfg_dict, variant, seed = args
    try:
        cfg = SuiteConfig.from_dict(cfg_dict)
        records = run_session(cfg, variant, seed)
        return variant, seed, [r.__dict__ for r in records]
    except Exception as exc:  # a failed session must not sink the suite
        return variant, seed, f"{type(exc).__name__}: {exc}"


def run_suite(cfg: SuiteConfig, out_dir: str | Path | None = None,
              workers: int | None = None,
              progress: bool = False) -> tuple[list[EpisodeRecord], Summary, dict]:
    """Run every variant x seed; merge deterministically by (variant, seed)."""
    jobs = [(cfg.to_dict(), v, s) for v in cfg.variants for s in cfg.seeds]
    if workers is None:
        workers = min(os.cpu_count() or 1, len(jobs))
    results: dict[tuple[str, int], list[dict] | str] = {}
    if workers > 1 and len(jobs) > 1:
        import multiprocessing as mp

        os.environ.setdefault("OMP_NUM_THREADS", "1")
        ctx = mp.get_context("spawn")
        with ctx.Pool(workers) as pool:
            for variant, seed, payload in pool.imap_unordered(_cell, jobs):
                results[(variant, seed)] = payload
                if progress:
                    print(f"done {variant} seed={seed}", flush=True)
    else:
        for job in jobs:
            variant, seed, payload = _cell(job)
            results[(variant, seed)] = payload
            if progress:
                print(f"done {variant} seed={seed}", flush=True)

    records: list[EpisodeRecord] = []
    errors: dict[str, str] = {}
    for variant in cfg.variants:
        for seed in cfg.seeds:
            payload = results[(variant, seed)]
            if isinstance(payload, str):
                errors[f"{variant}/{seed}"] = payload
            else:
                records.extend(EpisodeRecord.from_dict(d) for d in payload)

    summary = summarize(records, cap=cfg.asha.attempt_cap)
    report = {"summary": summary.to_dict(), "errors": errors, "suite": cfg.name}
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "records.jsonl", "w") as f:
            for r in records:
                f.write(r.to_json() + "\n")
        (out / "summary.json").write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
        from .metrics import format_table

        (out / "table.txt").write_text(format_table(summary) + "\n")
    return records, summary, report


SHIFT_KINDS = ("task_shift", "env_shift", "input_drift")


def shift_suite_config(kind: str, base: SuiteConfig) -> SuiteConfig:
    """Derive calibration/online distribution mismatch from a base suite."""
    if kind == "task_shift":
        calib = replace(base.calib_env, task={"indices": [1, 2]})
        online = replace(base.online_env, task={"indices": [1, 2, 3]})
        return replace(base, name=f"{base.name}-task_shift", calib_env=calib,
                       online_env=online)
    if kind == "env_shift":
        calib = replace(base.calib_env,
                        task={**base.calib_env.task, "door": "never_cover"})
        online = replace(base.online_env, task={**base.online_env.task, "door": "random"})
        return replace(base, name=f"{base.name}-env_shift", calib_env=calib,
                       online_env=online)
    if kind == "input_drift":
        return replace(base, name=f"{base.name}-input_drift",
                       drift={"walk_std": 0.02} if base.drift is None else base.drift)
    raise ValueError(f"unknown shift kind {kind!r}")


def shift_windows(records: list[EpisodeRecord], episodes: int,
                  window: int = 20) -> dict[str, dict[str, float]]:
    """Per-variant first/last window first-attempt rates, averaged across seeds."""
    out: dict[str, dict[str, float]] = {}
    for variant in sorted({r.variant for r in records}):
        vrecs = [r for r in records if r.variant == variant]
        seeds = sorted({r.seed for r in vrecs})
        early, late = [], []
        for seed in seeds:
            srecs = [r for r in vrecs if r.seed == seed]
            early.append(windowed_rate(srecs, 0, window))
            late.append(windowed_rate(srecs, episodes - window, episodes))
        out[variant] = {
            "early": sum(early) / len(early),
            "late": sum(late) / len(late),
            "delta": sum(late) / len(late) - sum(early) / len(early),
        }
    return out
