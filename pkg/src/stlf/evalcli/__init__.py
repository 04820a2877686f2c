"""Metrics, checkpoints and the command-line interface."""

from .checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from .metrics import MetricsError, MetricsReport, mae, mape, metrics, relative_errors

__all__ = [
    "Checkpoint",
    "CheckpointError",
    "MetricsError",
    "MetricsReport",
    "load_checkpoint",
    "mae",
    "mape",
    "metrics",
    "relative_errors",
    "save_checkpoint",
]
