"""Experiment orchestration: configs, runs, reports and the command line."""

from .config import EXPERIMENTS, PRESETS, ConfigError, ExperimentConfig, load_config
from .runner import RunManifest, ReportError, load_manifest, report, run

__all__ = [
    "EXPERIMENTS",
    "PRESETS",
    "ConfigError",
    "ExperimentConfig",
    "RunManifest",
    "ReportError",
    "load_config",
    "load_manifest",
    "report",
    "run",
]
