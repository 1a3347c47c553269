"""Configuration-driven simulation benchmark."""
from .aggregate import aggregate, relative_excess
from .config import BenchConfig, ConfigError, ScenarioEntry, derive_seed, load_config
from .runner import COLUMNS, ResultRow, read_results, run_benchmark, run_task

__all__ = [
    "BenchConfig", "COLUMNS", "ConfigError", "ResultRow", "ScenarioEntry", "aggregate",
    "derive_seed", "load_config", "read_results", "relative_excess", "run_benchmark", "run_task",
]
