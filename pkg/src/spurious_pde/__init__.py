"""Cubic two-layer CNN under spurious correlations: data, training, and dynamics checks."""
from .config import ExperimentConfig, load_config, parse_config
from .model import ModelConfig, forward, grad, init_weights
from .optim import OptimizerState, gd_step, gdm_step, reset_momentum
from .pde import PdeConfig, TrainResult, train_erm, train_pde
from .synthgen import ConfigError, DataConfig, Dataset, generate_dataset, make_basis

__all__ = [
    "ConfigError", "DataConfig", "Dataset", "ExperimentConfig", "ModelConfig", "OptimizerState",
    "PdeConfig", "TrainResult", "forward", "gd_step", "gdm_step", "generate_dataset", "grad",
    "init_weights", "load_config", "make_basis", "parse_config", "reset_momentum", "train_erm",
    "train_pde",
]
