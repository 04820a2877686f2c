"""Mini-batch training with Adam, step LR decay and early stopping."""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..dataio.splits import ConfigError
from ..evalcli.metrics import MetricsError, mae, mape
from ..forecaster import ForecastModel
from ..numcore import AdamState, LrSchedule, NumericalDivergenceError, adam_step, clip_grad_norm
from .config import TrainConfig
from .losses import loss_lf

EVAL_CHUNK = 256
LOG_FIELDS = ("epoch", "lr", "train_loss", "val_mae", "val_mape", "elapsed_s")


class TrainingDivergence(FloatingPointError):
    def __init__(self, epoch: int, batch: int, detail: str = "loss is not finite"):
        super().__init__(f"training diverged at epoch {epoch}, batch {batch}: {detail}")
        self.epoch = epoch
        self.batch = batch


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    train_loss: float
    val_mae: float
    val_mape: float
    elapsed_s: float


@dataclass
class History:
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = -1
    best_val_mae: float = math.inf
    stopped_early: bool = False

    @property
    def train_loss(self) -> list[float]:
        return [r.train_loss for r in self.records]

    @property
    def val_mae(self) -> list[float]:
        return [r.val_mae for r in self.records]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(LOG_FIELDS)
            for r in self.records:
                w.writerow([r.epoch, repr(r.lr), repr(r.train_loss), repr(r.val_mae), repr(r.val_mape), f"{r.elapsed_s:.3f}"])


def _stats(dataset):
    series = getattr(dataset, "series", None)
    if series is None:
        series = dataset.windows.series
    return series.stats


def predict_set(model: ForecastModel, dataset) -> np.ndarray:
    """Standardized predictions for every sample of ``dataset``."""
    out = []
    for lo in range(0, len(dataset), EVAL_CHUNK):
        idx = np.arange(lo, min(lo + EVAL_CHUNK, len(dataset)))
        X, hist, _ = dataset.batch(idx)
        out.append(model.predict(X, hist))
    return np.concatenate(out) if out else np.zeros((0, model.config.horizon))


def evaluate(model: ForecastModel, dataset) -> tuple[float, float]:
    """(MAE, MAPE) in MW on de-standardized outputs."""
    pred = dataset.to_mw(predict_set(model, dataset))
    truth = dataset.truth_mw()
    try:
        pct = mape(truth, pred)
    except MetricsError:
        pct = math.nan
    return mae(truth, pred), pct


def epoch_loss(model: ForecastModel, dataset, lam: float, l1_mode: str = "alpha") -> float:
    """Mean objective over ``dataset`` at the current parameters, no updates."""
    from .. import numcore as nc

    total = 0.0
    with nc.no_grad():
        for lo in range(0, len(dataset), EVAL_CHUNK):
            idx = np.arange(lo, min(lo + EVAL_CHUNK, len(dataset)))
            X, hist, target = dataset.batch(idx)
            fp = model.forward(X, hist)
            scores = fp.scores if l1_mode == "scores" else None
            total += float(loss_lf(fp.y, target, fp.alpha, lam, scores).data) * len(idx)
    return total / len(dataset)


def fit(
    model: ForecastModel,
    train_set,
    val_set,
    config: TrainConfig,
    lam: float | None = None,
    epochs: int | None = None,
    log_path=None,
    on_epoch=None,
    stop_when=None,
) -> tuple[ForecastModel, History]:
    """Train ``model`` in place; returns it with the best-validation parameters restored.

    ``on_epoch(record)`` is called after every epoch; training also ends
    early once ``stop_when(record)`` returns true.
    """
    if len(train_set) == 0:
        raise ConfigError("empty training set")
    if val_set is None or len(val_set) == 0:
        raise ConfigError("empty validation set")
    lam = config.lam if lam is None else lam
    epochs = config.epochs if epochs is None else epochs
    if lam < 0:
        raise ConfigError(f"lam must be non-negative, got {lam}")

    stats = _stats(train_set)
    model.target_mean, model.target_std = stats.target_mean, stats.target_std
    params = model.trainable_parameters()
    if not params:
        raise ConfigError("model has no trainable parameters")
    data = {k: t.data for k, t in params.items()}
    state = AdamState.for_params(data, lr=config.lr)
    schedule = LrSchedule(config.lr, config.lr_factor, config.lr_period)
    rng = np.random.Generator(np.random.PCG64([config.seed, 1]))
    use_scores = config.l1_mode == "scores"

    history = History()
    best = {k: v.copy() for k, v in data.items()}
    bad = 0
    t0 = time.perf_counter()
    n = len(train_set)
    for epoch in range(epochs):
        state.lr = schedule.rate(epoch)
        order = rng.permutation(n)
        running = 0.0
        for b, lo in enumerate(range(0, n, config.batch_size)):
            idx = order[lo : lo + config.batch_size]
            X, hist, target = train_set.batch(idx)
            model.zero_grad()
            try:
                fp = model.forward(X, hist)
            except NumericalDivergenceError as exc:
                raise TrainingDivergence(epoch, b, str(exc)) from exc
            loss = loss_lf(fp.y, target, fp.alpha, lam, fp.scores if use_scores else None)
            value = float(loss.data)
            if not math.isfinite(value):
                raise TrainingDivergence(epoch, b)
            loss.backward()
            grads = {k: (t.grad if t.grad is not None else np.zeros_like(t.data)) for k, t in params.items()}
            clip_grad_norm(grads, config.max_norm)
            adam_step(data, grads, state)
            running += value * len(idx)

        val_mae, val_mape = evaluate(model, val_set)
        rec = EpochRecord(epoch, state.lr, running / n, val_mae, val_mape, time.perf_counter() - t0)
        history.records.append(rec)
        if on_epoch is not None:
            on_epoch(rec)
        if val_mae < history.best_val_mae:
            history.best_val_mae, history.best_epoch = val_mae, epoch
            best = {k: v.copy() for k, v in data.items()}
            bad = 0
        else:
            bad += 1
            if bad > config.patience:
                history.stopped_early = True
                break
        if stop_when is not None and stop_when(rec):
            break

    for k, v in best.items():
        data[k][...] = v
    model.zero_grad()
    model.trained = True
    if log_path is not None:
        history.write_csv(log_path)
    return model, history


def train_forecaster(model: ForecastModel, train_set, val_set, config: TrainConfig, log_path=None):
    return fit(model, train_set, val_set, config, log_path=log_path)
