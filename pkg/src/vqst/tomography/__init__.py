"""Variational state learning: estimators, optimizers, training, reconstruction."""

from .estimator import (
    EstimatorConfig,
    FidelityEvaluator,
    Target,
    chain_factor,
    fidelity,
    gradient_parameter_shift,
    loss,
)
from .optim import AdamState, LbfgsResult, adam_step, lbfgs_minimize
from .training import TrainConfig, TrainRecord, TrainRow, reconstruct, reconstruction_fidelity, train

__all__ = [
    "AdamState",
    "EstimatorConfig",
    "FidelityEvaluator",
    "LbfgsResult",
    "Target",
    "TrainConfig",
    "TrainRecord",
    "TrainRow",
    "adam_step",
    "chain_factor",
    "fidelity",
    "gradient_parameter_shift",
    "lbfgs_minimize",
    "loss",
    "reconstruct",
    "reconstruction_fidelity",
    "train",
]
