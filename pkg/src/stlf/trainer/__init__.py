"""Forecaster and error-correction training, grid search."""

from .config import TrainConfig
from .framework import FrameworkResult, train_framework
from .grid import GridResult, GridRun, GridSpec, grid_search
from .loop import EpochRecord, History, TrainingDivergence, epoch_loss, evaluate, fit, predict_set, train_forecaster
from .losses import l1_penalty, loss_ec, loss_lf, mse

__all__ = [
    "EpochRecord",
    "FrameworkResult",
    "GridResult",
    "GridRun",
    "GridSpec",
    "History",
    "TrainConfig",
    "TrainingDivergence",
    "epoch_loss",
    "evaluate",
    "fit",
    "grid_search",
    "l1_penalty",
    "loss_ec",
    "loss_lf",
    "mse",
    "predict_set",
    "train_forecaster",
    "train_framework",
]
