"""Scenario configuration, Monte-Carlo runs, CSV output and the CLI."""

from .config import ScenarioConfig, builtin_ar2_config, builtin_projectile_config, load_config, resolve_scenario
from .csvio import emit_csv, parse_csv, read_csv
from .runner import MseSeries, ScenarioResult, run_point, run_scenario

__all__ = [
    "ScenarioConfig", "builtin_ar2_config", "builtin_projectile_config", "load_config", "resolve_scenario",
    "emit_csv", "parse_csv", "read_csv", "MseSeries", "ScenarioResult", "run_point", "run_scenario",
]
