"""Experiment configuration, execution, fitting, verification and reporting."""
from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .fit import RateFit, fit_points, fit_rate, group_fits
from .report import RunResult, csv_text, emit_report, parse_csv, read_csv, svg_text
from .runner import BudgetExhausted, run_experiment
from .verify import SuiteReport, play_det_game, verify_suite

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "parse_config", "RateFit",
           "fit_points", "fit_rate", "group_fits", "RunResult", "csv_text", "emit_report",
           "parse_csv", "read_csv", "svg_text", "BudgetExhausted", "run_experiment",
           "SuiteReport", "play_det_game", "verify_suite"]
