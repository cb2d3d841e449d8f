"""Configuration, sweeps, invariant suites and the command line."""
from .config import RunConfig, validate_config
from .invariants import InvariantReport, run_invariant_suite
from .sweep import ComparisonReport, run_density_sweep, to_csv, to_json

__all__ = ["RunConfig", "validate_config", "run_density_sweep", "ComparisonReport",
           "run_invariant_suite", "InvariantReport", "to_csv", "to_json"]
