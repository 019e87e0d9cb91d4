"""Deterministic discrete-event core and the experiment driver."""

from .events import Event, EventKind, EventQueue, Fault, FaultPlan
from .journal import Journal, find_gate_violations
from .engine import (
    SchedulerKind,
    MetricsRecord,
    Simulation,
    RunResult,
    run_experiment,
)

__all__ = [
    "Event",
    "EventKind",
    "EventQueue",
    "Fault",
    "FaultPlan",
    "Journal",
    "find_gate_violations",
    "SchedulerKind",
    "MetricsRecord",
    "Simulation",
    "RunResult",
    "run_experiment",
]
