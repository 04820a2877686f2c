"""Residual error correction by transfer from a trained forecaster.

The correction model is a copy of the forecaster with the feature weighter
frozen. Its history channel carries past residuals ``e_h`` instead of past
loads, and it is trained to predict the future residuals ``e_f``. The final
forecast is ``y_bar = y_hat + e_hat`` in MW.

Residual history for a window starting at row ``s`` covers rows
``s .. s + T_h``; it is assembled from the forecaster's own day-ahead
residuals on the ``M`` windows whose horizons tile that span, i.e. windows
starting at ``s - T_h + j * t_d`` for ``j = 0 .. M - 1``. Only rows before
the window's horizon are used, so the construction is causal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataio.embedding import EmbeddedSeries
from .dataio.splits import ConfigError
from .dataio.windows import WindowSet
from .forecaster import ForecastModel

PREDICT_CHUNK = 256


class UsageError(RuntimeError):
    """An operation was called on a model in the wrong state."""


@dataclass
class ErrorSample:
    X: np.ndarray
    e_h: np.ndarray
    e_f: np.ndarray
    start: int


def _require_trained(model: ForecastModel, what: str) -> None:
    if not model.trained:
        raise UsageError(f"{what} is not trained")


def predict_starts(model: ForecastModel, series: EmbeddedSeries, starts: np.ndarray) -> np.ndarray:
    """Standardized forecasts for windows beginning at each row in ``starts``."""
    ws = WindowSet(series, starts, model.config.history, model.config.horizon)
    out = np.zeros((len(ws), model.config.horizon))
    for lo in range(0, len(ws), PREDICT_CHUNK):
        idx = np.arange(lo, min(lo + PREDICT_CHUNK, len(ws)))
        X, hist, _ = ws.batch(idx)
        out[idx] = model.predict(X, hist)
    return out


class ErrorSet:
    """Error samples for a set of windows, batched like a :class:`WindowSet`.

    ``batch`` yields ``(X, e_h, e_f)``; ``to_mw`` turns predicted residuals
    into corrected loads using the stored forecaster outputs.
    """

    def __init__(self, windows: WindowSet, e_h: np.ndarray, e_f: np.ndarray, y_hat: np.ndarray):
        self.windows = windows
        self.e_h = e_h
        self.e_f = e_f
        self.y_hat = y_hat  # standardized forecaster outputs, (K, T_f)

    def __len__(self) -> int:
        return len(self.windows)

    def __getitem__(self, i: int) -> ErrorSample:
        w = self.windows[i]
        return ErrorSample(w.X, self.e_h[i], self.e_f[i], w.start)

    def _idx(self, idx):
        return np.arange(len(self)) if idx is None else np.asarray(idx, dtype=np.int64)

    def subset(self, idx) -> "ErrorSet":
        idx = self._idx(idx)
        return ErrorSet(self.windows.subset(idx), self.e_h[idx], self.e_f[idx], self.y_hat[idx])

    def batch(self, idx=None):
        idx = self._idx(idx)
        X, _, _ = self.windows.batch(idx)
        return X, self.e_h[idx], self.e_f[idx]

    def to_mw(self, pred_std, idx=None) -> np.ndarray:
        st = self.windows.series.stats
        return (self.y_hat[self._idx(idx)] + np.asarray(pred_std)) * st.target_std + st.target_mean

    def truth_mw(self, idx=None) -> np.ndarray:
        return self.windows.truth_mw(idx)

    def uncorrected_mw(self, idx=None) -> np.ndarray:
        st = self.windows.series.stats
        return self.y_hat[self._idx(idx)] * st.target_std + st.target_mean


def compute_residuals(forecaster: ForecastModel, windows: WindowSet) -> ErrorSet:
    """Residuals ``e = y - y_hat`` (standardized) for ``windows`` and their histories.

    Windows that start fewer than ``T_h`` rows into the series have no
    residual history and are dropped.
    """
    _require_trained(forecaster, "forecaster")
    cfg = forecaster.config
    T_h, t_d, M = cfg.history, cfg.day_len, cfg.days
    if windows.history != T_h or windows.horizon != cfg.horizon:
        raise ConfigError("window geometry does not match the forecaster")
    keep = np.flatnonzero(windows.starts >= T_h)
    windows = windows.subset(keep)
    if len(windows) == 0:
        raise ConfigError("no windows with a full residual history")
    series = windows.series

    # every forecast start needed: each history block plus the window itself
    offsets = -T_h + t_d * np.arange(M + 1)
    needed = np.unique((windows.starts[:, None] + offsets[None, :]).ravel())
    y_hat = predict_starts(forecaster, series, needed)
    rows = needed[:, None] + T_h + np.arange(t_d)[None, :]
    resid = series.target[rows] - y_hat
    pos = {int(s): k for k, s in enumerate(needed)}

    K = len(windows)
    e_h = np.zeros((K, T_h))
    e_f = np.zeros((K, t_d))
    y_self = np.zeros((K, t_d))
    for k, s in enumerate(windows.starts):
        blocks = [resid[pos[int(s + o)]] for o in offsets[:M]]
        e_h[k] = np.concatenate(blocks)
        e_f[k] = resid[pos[int(s)]]
        y_self[k] = y_hat[pos[int(s)]]
    return ErrorSet(windows, e_h, e_f, y_self)


def transfer_init(forecaster: ForecastModel) -> ForecastModel:
    """Deep copy of ``forecaster`` with the feature weighter frozen."""
    model = forecaster.copy()
    model.frozen = {"weighter"}
    model._sync_requires_grad()
    model.trained = False
    return model


def train_correction(
    model: ForecastModel, train_set: ErrorSet, val_set: ErrorSet, config, log_path=None, on_epoch=None
):
    """Fit the correction model on residuals with plain MSE; returns ``(model, history)``."""
    from .trainer.loop import fit

    if len(train_set) == 0:
        raise ConfigError("empty error-correction training set")
    if "weighter" not in model.frozen:
        raise UsageError("correction model must have its feature weighter frozen; use transfer_init")
    epochs = config.ec_epochs if getattr(config, "ec_epochs", None) else config.epochs
    return fit(model, train_set, val_set, config, lam=0.0, epochs=epochs, log_path=log_path, on_epoch=on_epoch)


def corrected_forecast(
    forecaster: ForecastModel, correction: ForecastModel, sample, residual_history=None
) -> np.ndarray:
    """``y_hat + e_hat`` in MW for one window, given its residual history."""
    _require_trained(forecaster, "forecaster")
    _require_trained(correction, "correction model")
    T_h = forecaster.config.history
    if residual_history is None:
        residual_history = getattr(sample, "e_h", None)
    if residual_history is None:
        raise UsageError("corrected forecast needs the residual history e_h")
    e_h = np.asarray(residual_history, dtype=np.float64)
    if e_h.shape != (T_h,):
        raise UsageError(f"residual history must have {T_h} values, got shape {e_h.shape}")
    X = np.asarray(sample.X)[None]
    y_h = np.asarray(sample.y_h)[None]
    y_hat = forecaster.predict(X, y_h)[0]
    e_hat = correction.predict(X, e_h[None])[0]
    return forecaster.destandardize(y_hat) + e_hat * forecaster.target_std


def corrected_forecasts(forecaster: ForecastModel, correction: ForecastModel, errors: ErrorSet):
    """Batched ``(y_hat, y_bar)`` in MW over an :class:`ErrorSet`."""
    _require_trained(correction, "correction model")
    e_hat = np.zeros_like(errors.e_f)
    for lo in range(0, len(errors), PREDICT_CHUNK):
        idx = np.arange(lo, min(lo + PREDICT_CHUNK, len(errors)))
        X, e_h, _ = errors.batch(idx)
        e_hat[idx] = correction.predict(X, e_h)
    return errors.uncorrected_mw(), errors.to_mw(e_hat)


def param_checksum(model: ForecastModel, group: str | None = None) -> str:
    """SHA-256 over parameter bytes, optionally restricted to one group."""
    import hashlib

    h = hashlib.sha256()
    for name, t in model.named_parameters().items():
        if group is None or name.split(".")[0] == group:
            h.update(name.encode())
            h.update(np.ascontiguousarray(t.data, dtype="<f8").tobytes())
    return h.hexdigest()
