"""Stochastic dynamic cache partitioning.

Splits a shared cache among content providers using only each provider's
aggregate miss rate, plus the workload generator, exact baselines and
simulation loop needed to evaluate it.
"""
from sdcp.allocation import (
    AllocationError,
    center_point,
    compute_update,
    make_test_allocations,
    project_simplex,
    reduced_budget,
    sample_perturbation,
    sdcp_step,
)
from sdcp.engine import (
    ConfigError,
    ExperimentConfig,
    Trace,
    run_baseline,
    run_experiment,
    run_replications,
)
from sdcp.schedules import ScheduleConfig, ScheduleKind

__version__ = "0.1.0"
