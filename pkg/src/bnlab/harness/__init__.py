"""Experiment driver: configs, seeded runs, aggregation, sweeps, plots."""

from .aggregate import AggregateStats, aggregate_runs, final_score, \
    interp_series, read_metrics, write_aggregate_csv
from .config import RunConfig, from_mapping, load_config, with_updates
from .plotting import plot_aggregates
from .runner import RunResult, output_root, run_config, run_filename, run_single
from .sweep import SWEEP_AXES, SweepCell, build_cells, normalize_scores, \
    parse_axis_values, run_sweep, write_sweep_files
from .verify import SUITES, CheckResult, format_report, run_suites

__all__ = [
    "AggregateStats",
    "CheckResult",
    "RunConfig",
    "RunResult",
    "SUITES",
    "SWEEP_AXES",
    "SweepCell",
    "aggregate_runs",
    "build_cells",
    "final_score",
    "format_report",
    "from_mapping",
    "interp_series",
    "load_config",
    "normalize_scores",
    "output_root",
    "parse_axis_values",
    "plot_aggregates",
    "read_metrics",
    "run_config",
    "run_filename",
    "run_single",
    "run_suites",
    "with_updates",
    "write_aggregate_csv",
    "write_sweep_files",
]
