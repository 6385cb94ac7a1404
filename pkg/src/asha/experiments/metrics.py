"""Evaluation records and their summary statistics."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Iterable


@dataclass
class EpisodeRecord:
    variant: str
    seed: int
    episode: int
    task_id: object
    attempt_index: int
    outcome: str          # success | wrong_task | step_limit
    feedback: int
    first_attempt: bool
    steps: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @staticmethod
    def from_dict(d: dict) -> "EpisodeRecord":
        return EpisodeRecord(**d)


@dataclass
class VariantSummary:
    variant: str
    seeds: int
    first_attempt_rate: float
    first_attempt_stderr: float
    failed_attempts: float
    failed_attempts_stderr: float
    episodes: int


@dataclass
class Summary:
    variants: dict[str, VariantSummary] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {name: asdict(v) for name, v in sorted(self.variants.items())}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _mean_stderr(values: list[float]) -> tuple[float, float]:
    n = len(values)
    mean = sum(values) / n
    if n < 2:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, (var / n) ** 0.5


def first_attempt_rate(records: Iterable[EpisodeRecord]) -> float:
    firsts = [r for r in records if r.attempt_index == 0]
    if not firsts:
        return 0.0
    return sum(r.outcome == "success" for r in firsts) / len(firsts)


def failed_attempts_per_task(records: list[EpisodeRecord], cap: int) -> float:
    """Failures per completed task; timeouts count the full cap."""
    counts: list[int] = []
    by_episode = sorted(records, key=lambda r: r.episode)
    open_failures = 0
    for r in by_episode:
        if r.outcome == "success":
            counts.append(r.attempt_index)
            open_failures = 0
        else:
            open_failures = r.attempt_index + 1
            if open_failures >= cap:
                counts.append(cap)
                open_failures = 0
    if not counts:
        return float(cap)
    return sum(counts) / len(counts)


def summarize(records: list[EpisodeRecord], cap: int = 5) -> Summary:
    """First-attempt success and failed-attempts-per-task, mean +/- stderr across seeds."""
    summary = Summary()
    variants = sorted({r.variant for r in records})
    for variant in variants:
        vrecs = [r for r in records if r.variant == variant]
        seeds = sorted({r.seed for r in vrecs})
        rates, fails = [], []
        for seed in seeds:
            srecs = [r for r in vrecs if r.seed == seed]
            rates.append(first_attempt_rate(srecs))
            fails.append(failed_attempts_per_task(srecs, cap))
        rate_m, rate_se = _mean_stderr(rates)
        fail_m, fail_se = _mean_stderr(fails)
        summary.variants[variant] = VariantSummary(
            variant=variant, seeds=len(seeds),
            first_attempt_rate=rate_m, first_attempt_stderr=rate_se,
            failed_attempts=fail_m, failed_attempts_stderr=fail_se,
            episodes=len(vrecs),
        )
    return summary


def windowed_rate(records: list[EpisodeRecord], lo: int, hi: int) -> float:
    """First-attempt success rate over episodes with lo <= episode < hi."""
    window = [r for r in records if lo <= r.episode < hi and r.attempt_index == 0]
    if not window:
        return 0.0
    return sum(r.outcome == "success" for r in window) / len(window)


def rolling_rates(records: list[EpisodeRecord], window: int = 50) -> list[float]:
    if not records:
        return []
    n = max(r.episode for r in records) + 1
    return [windowed_rate(records, lo, min(lo + window, n)) for lo in range(0, n, window)]


def format_table(summary: Summary) -> str:
    """Plain-text table in the ablation-table layout."""
    lines = [f"{'variant':<22} {'success rate':>16} {'failed attempts':>18}"]
    order = ["random_latent", "non_adaptive", "asha", "det_input_enc",
             "det_pretrain_enc", "sac_scratch", "no_failure_relabel", "latent_regression"]
    names = [v for v in order if v in summary.variants] + [
        v for v in sorted(summary.variants) if v not in order
    ]
    for name in names:
        v = summary.variants[name]
        lines.append(
            f"{name:<22} {v.first_attempt_rate:>8.2f} ± {v.first_attempt_stderr:.2f}"
            f" {v.failed_attempts:>11.1f} ± {v.failed_attempts_stderr:.1f}"
        )
    return "\n".join(lines)
