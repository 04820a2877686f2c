"""Two-stage training: forecaster, then residual correction."""

from __future__ import annotations

from dataclasses import dataclass

from ..dataio.splits import DatasetSplit
from ..errcorrect import ErrorSet, compute_residuals, train_correction, transfer_init
from ..forecaster import ForecastModel
from .config import TrainConfig
from .loop import History, train_forecaster


@dataclass
class FrameworkResult:
    forecaster: ForecastModel  # holds the weighter f_l and the network g_l
    correction: ForecastModel | None  # g_e, sharing the frozen f_l
    history: History
    ec_history: History | None = None
    ec_train: ErrorSet | None = None
    ec_val: ErrorSet | None = None

    @property
    def weighter(self):
        return self.forecaster.weighter


def train_framework(
    split: DatasetSplit,
    config: TrainConfig,
    skip_ec: bool = False,
    log_path=None,
    ec_log_path=None,
    model: ForecastModel | None = None,
) -> FrameworkResult:
    if model is None:
        model = ForecastModel.init(config.model_for(split.train), seed=config.seed)
    # the forecaster trains on stride-1 windows and early-stops on the EC-year validation windows
    model, history = train_forecaster(model, split.train, split.validation, config, log_path=log_path)
    if skip_ec:
        return FrameworkResult(model, None, history)

    errors = compute_residuals(model, split.ec_pool)
    # the pool keeps time order; map the random EC/validation partition onto it
    pos = {int(s): k for k, s in enumerate(errors.windows.starts)}
    tr = [pos[int(s)] for s in split.ec_train.starts if int(s) in pos]
    va = [pos[int(s)] for s in split.validation.starts if int(s) in pos]
    ec_train, ec_val = errors.subset(tr), errors.subset(va)

    correction = transfer_init(model)
    correction, ec_history = train_correction(correction, ec_train, ec_val, config, log_path=ec_log_path)
    return FrameworkResult(model, correction, history, ec_history, ec_train, ec_val)
