"""Experiment configuration, execution, record files and the command line."""

from .config import ConfigError, ExperimentConfig, apply_overrides, config_hash, load_config, parse_config
from .records import RecordError, RecordTable, aggregate, read_records, write_records
from .runner import RunResult, artifact_dir_for, run_experiment

__all__ = ["ConfigError", "ExperimentConfig", "apply_overrides", "config_hash", "load_config", "parse_config",
           "RecordError", "RecordTable", "aggregate", "read_records", "write_records", "RunResult",
           "artifact_dir_for", "run_experiment"]
