"""Sweep driver, property suites, and the command line interface."""

from .sweep import (
    CornerVerdict,
    FitResult,
    RunConfig,
    SweepRecord,
    alpha_sweep,
    corner_demo,
    emit,
    fit_ratio,
    records_from_csv,
    records_from_json,
)
from .checks import SUITES, divergence_suite, gradient_suite, oracle_suite, trace_suite
