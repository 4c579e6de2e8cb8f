"""Experiment harness: configs, metrics, export, cache and CLI."""

from .config import ExperimentConfig, config_from_dict, load_config
from .experiments import assemble_only, run_experiment
from .io import MatrixCache, load_matrix, read_snapshot, save_matrix, write_report, write_snapshot
from .metrics import error_norm, fit_rate, restrict
