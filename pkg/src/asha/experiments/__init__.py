from .metrics import (
    EpisodeRecord,
    Summary,
    VariantSummary,
    failed_attempts_per_task,
    first_attempt_rate,
    format_table,
    rolling_rates,
    summarize,
    windowed_rate,
)
from .suite import (
    SHIFT_KINDS,
    SuiteConfig,
    run_session,
    run_suite,
    shift_suite_config,
    shift_windows,
)
from .variants import VARIANT_NAMES, ScratchSacSession, VariantSpec, build_variant

__all__ = [
    "EpisodeRecord",
    "Summary",
    "VariantSummary",
    "failed_attempts_per_task",
    "first_attempt_rate",
    "format_table",
    "rolling_rates",
    "summarize",
    "windowed_rate",
    "SHIFT_KINDS",
    "SuiteConfig",
    "run_session",
    "run_suite",
    "shift_suite_config",
    "shift_windows",
    "VARIANT_NAMES",
    "ScratchSacSession",
    "VariantSpec",
    "build_variant",
]
