"""Deterministic fault-injecting simulator for the farm."""

from .engine import (CrossRunStraggler, DeadlockDetected, Equal, FirstDivergence,
                     Simulation, SimulationLimit, SimulationResult, UnknownWorker,
                     compare_traces, replay, run_collecting, run_scenario)
from .metrics import Metrics, RunMetrics, compute_metrics
from .scenario import (ComputeModel, Crash, LatencyModel, Rejoin, Scenario,
                       ScenarioError, Slowdown, load_scenario, parse_scenario,
                       scenario_from_dict)
from .trace import EventTrace, TraceRecord

__all__ = [
    "ComputeModel", "Crash", "CrossRunStraggler", "DeadlockDetected", "Equal",
    "EventTrace", "FirstDivergence", "LatencyModel", "Metrics", "Rejoin", "RunMetrics",
    "Scenario", "ScenarioError", "Simulation", "SimulationLimit", "SimulationResult",
    "Slowdown", "TraceRecord", "UnknownWorker", "compare_traces", "compute_metrics",
    "load_scenario", "parse_scenario", "replay", "run_collecting", "run_scenario",
    "scenario_from_dict",
]
