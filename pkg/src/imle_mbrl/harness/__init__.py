"""Experiment orchestration: config, seeding, the training loop, metrics,
and report emission."""

from .config import (
    AUTO_HORIZON,
    HORIZON_CAP,
    MODEL_VARIANTS,
    ExperimentConfig,
    build_config,
    load_config,
    parse_config_text,
)
from .metrics import MetricSeries, bootstrap_ci, group_series, iqm
from .report import build_version, emit_report, parse_metric_csv
from .rngs import RngPool
from .runner import RunResult, run_experiment, run_many

__all__ = [
    "AUTO_HORIZON",
    "ExperimentConfig",
    "HORIZON_CAP",
    "MODEL_VARIANTS",
    "MetricSeries",
    "RngPool",
    "RunResult",
    "bootstrap_ci",
    "build_config",
    "build_version",
    "emit_report",
    "group_series",
    "iqm",
    "load_config",
    "parse_config_text",
    "parse_metric_csv",
    "run_experiment",
    "run_many",
]
