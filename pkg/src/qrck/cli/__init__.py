"""Configuration-driven command line harness."""

from .config import ExperimentConfig, load_config, parse_config
from .runner import RESULT_COLUMNS, ResultRow, emit_results, run_experiment

__all__ = ["ExperimentConfig", "load_config", "parse_config", "RESULT_COLUMNS", "ResultRow", "emit_results", "run_experiment"]
