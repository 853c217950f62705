from .config import EXPERIMENTS, ExperimentSpec, load_spec, make_spec
from .report import report
from .runner import SCHEMA_VERSION, aggregate, dumps, load_result, run, run_replica, write_result

__all__ = [
    "EXPERIMENTS",
    "ExperimentSpec",
    "SCHEMA_VERSION",
    "aggregate",
    "dumps",
    "load_result",
    "load_spec",
    "make_spec",
    "report",
    "run",
    "run_replica",
    "write_result",
]
