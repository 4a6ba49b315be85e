"""Continuous-benchmarking harness.

Expand parameterized benchmark specs into run matrices, execute every run in
its own archived directory, keep the results in an append-only store, and
look for regressions and node-level anomalies over time.
"""
from .orchestrator import (
    ExecutorScenario,
    LocalExecutor,
    RunPlan,
    ScenarioStep,
    SimulatedExecutor,
    execute,
    execute_all,
    plan,
)
from .records import EventRecord, RunRecord
from .specmatrix import (
    BenchmarkSpec,
    Configuration,
    ExclusionRule,
    MetricSource,
    SpecError,
    expand,
    load_spec,
    parse_spec,
    render_command,
    serialize_spec,
)
from .store import Query, Store

__version__ = "0.1.0"
