"""Config-driven experiment runner and command-line interface."""

from .config import ExperimentConfig, GridSpec, ModelSpec, RegimeSpec, load_config, parse_config
from .experiments import RESULT_COLUMNS, run_experiment

__all__ = [
    "ExperimentConfig",
    "GridSpec",
    "ModelSpec",
    "RegimeSpec",
    "RESULT_COLUMNS",
    "load_config",
    "parse_config",
    "run_experiment",
]
