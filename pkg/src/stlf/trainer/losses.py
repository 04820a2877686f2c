"""Forecaster and error-correction objectives."""

from __future__ import annotations

import numpy as np

from .. import numcore as nc
from ..dataio.splits import ConfigError
from ..numcore import ContractError, Tensor


def mse(pred: Tensor, target) -> Tensor:
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ContractError(f"prediction shape {pred.shape} != target shape {target.shape}")
    return nc.mean(nc.square(nc.sub(pred, target)))


def l1_penalty(weights: Tensor) -> Tensor:
    """Mean over all rows of ``sum_k |w_k|``; rows are the leading axes."""
    rows = int(np.prod(weights.shape[:-1]))
    return nc.tsum(nc.absolute(weights)) * (1.0 / rows)


def loss_lf(pred: Tensor, target, alpha: Tensor, lam: float, scores: Tensor | None = None) -> Tensor:
    """MSE plus ``lam`` times the mean row-wise l1 norm of the feature weights.

    Softmax weights are non-negative and sum to one, so the default penalty
    is the constant ``lam`` and contributes no gradient. Passing ``scores``
    penalises the pre-softmax scores instead.
    """
    if lam < 0:
        raise ConfigError(f"l1 weight must be non-negative, got {lam}")
    loss = mse(pred, target)
    if lam == 0:
        return loss
    return loss + l1_penalty(alpha if scores is None else scores) * lam


def loss_ec(pred: Tensor, target) -> Tensor:
    return mse(pred, target)
