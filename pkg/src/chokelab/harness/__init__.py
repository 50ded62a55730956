"""Scenario execution, replication and model-versus-simulation comparison."""

from .runner import RunError, RunResult, Trace, replication_seeds, run_replications, run_single
from .scenario import Scenario, TcpParams, dump_scenario, load_scenarios

__all__ = [
    "RunError",
    "RunResult",
    "Scenario",
    "TcpParams",
    "Trace",
    "dump_scenario",
    "load_scenarios",
    "replication_seeds",
    "run_replications",
    "run_single",
]
