"""
Workflows module - experiment harness and the registered experiments
"""

from .harness import (
    EXPERIMENTS,
    ExperimentConfig,
    ExperimentRun,
    ResultRecord,
    Verdict,
    VerdictStatus,
    acceptance_suite,
    get_experiment,
    parallel_map,
    run_acceptance_suite,
    run_experiment
)
# experiment modules register themselves on import
from . import closed_forms, fluctuation_checks, limit_law_checks  # noqa: F401

__all__ = [
    'EXPERIMENTS',
    'ExperimentConfig',
    'ExperimentRun',
    'ResultRecord',
    'Verdict',
    'VerdictStatus',
    'acceptance_suite',
    'get_experiment',
    'parallel_map',
    'run_acceptance_suite',
    'run_experiment'
]
