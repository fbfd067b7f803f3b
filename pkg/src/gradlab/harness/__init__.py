"""Experiment harness: configs, immutable run records, sweeps, reports."""

from .config import RunConfig, load_config, parse_config
from .records import load_record, list_records, persist_record
from .runner import (
    ConvergenceStudy,
    convergence_study,
    emit_report,
    run_experiment,
    sweep,
)

__all__ = [
    "RunConfig",
    "load_config",
    "parse_config",
    "load_record",
    "list_records",
    "persist_record",
    "ConvergenceStudy",
    "convergence_study",
    "emit_report",
    "run_experiment",
    "sweep",
]
