"""Simulation design, Monte Carlo harness, forecasting and demo grids."""

from ghm.sim.demo import KINDS, demo_grid
from ghm.sim.design import SimDesign, ar1_errors, eval_grid, simulate, true_f, true_theta
from ghm.sim.forecast import ForecastReport, forecast_metrics, rolling_forecast
from ghm.sim.study import (
    MetricsReport,
    compute_metrics,
    metrics_from_files,
    read_records,
    run_study,
    write_records,
    write_summary,
)

__all__ = [
    "KINDS",
    "ForecastReport",
    "MetricsReport",
    "SimDesign",
    "ar1_errors",
    "compute_metrics",
    "demo_grid",
    "eval_grid",
    "forecast_metrics",
    "metrics_from_files",
    "read_records",
    "rolling_forecast",
    "run_study",
    "simulate",
    "true_f",
    "true_theta",
    "write_records",
    "write_summary",
]
