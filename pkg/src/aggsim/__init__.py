"""Discrete-event simulator of uplink machine-type traffic in a single LTE
cell, where intermediate aggregator nodes access the cell on behalf of many
small devices and opportunistically bundle their packets."""

from .config import ScenarioConfig, derive_run_seed, load_config, serialize
from .engine import RunResult, run
from .metrics import MetricSummary, find_optimal_n, latency_stats, outage, summarize, throughput
from .spatial import Topology, active_aggregator_density, deploy, empirical_active_fraction
from .sweep import SweepSpec, preset, run_sweep

__all__ = [
    "ScenarioConfig", "derive_run_seed", "load_config", "serialize",
    "RunResult", "run",
    "MetricSummary", "find_optimal_n", "latency_stats", "outage", "summarize", "throughput",
    "Topology", "active_aggregator_density", "deploy", "empirical_active_fraction",
    "SweepSpec", "preset", "run_sweep",
]
