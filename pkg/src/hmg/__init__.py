"""Hybrid AC/DC/storage microgrid simulator and Laplace-domain analyzer."""

from .config import (
    Event,
    HybridConfig,
    LoadedRun,
    Scenario,
    Toggles,
    load_config,
    parse_config,
    reference_config,
    reference_run,
    serialize_config,
)
from .sim import Metrics, SimTrace, compare_with_gecm, measure, run, write_trace_csv

__version__ = "0.1.0"

__all__ = [
    "Event", "HybridConfig", "LoadedRun", "Scenario", "Toggles",
    "load_config", "parse_config", "reference_config", "reference_run",
    "serialize_config", "Metrics", "SimTrace", "compare_with_gecm",
    "measure", "run", "write_trace_csv", "__version__",
]
