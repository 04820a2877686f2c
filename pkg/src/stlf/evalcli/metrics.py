"""MAE, MAPE and per-point relative error."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class MetricsError(ValueError):
    """Inputs for which a metric is undefined."""

    def __init__(self, message: str, indices=None):
        super().__init__(message)
        self.indices = [] if indices is None else [int(i) for i in indices]


def _pair(y, y_hat) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=np.float64).ravel()
    y_hat = np.asarray(y_hat, dtype=np.float64).ravel()
    if y.shape != y_hat.shape:
        raise MetricsError(f"length mismatch: {y.size} true values vs {y_hat.size} predictions")
    if y.size == 0:
        raise MetricsError("no points to evaluate")
    return y, y_hat


def _check_nonzero(y: np.ndarray) -> None:
    zero = np.flatnonzero(y == 0)
    if zero.size:
        raise MetricsError(f"MAPE undefined: y == 0 at indices {zero[:10].tolist()}", zero)


def mae(y, y_hat) -> float:
    y, y_hat = _pair(y, y_hat)
    return float(np.mean(np.abs(y - y_hat)))


def relative_errors(y, y_hat) -> np.ndarray:
    """``|y - y_hat| / y * 100`` per point."""
    y, y_hat = _pair(y, y_hat)
    _check_nonzero(y)
    return np.abs(y - y_hat) / y * 100.0


def mape(y, y_hat) -> float:
    """Mean absolute percentage error, in percent."""
    y, y_hat = _pair(y, y_hat)
    _check_nonzero(y)
    return float(np.mean(np.abs((y - y_hat) / y)) * 100.0)


@dataclass
class MetricsReport:
    mae: float
    mape: float | None  # None when some y == 0
    re: np.ndarray | None
    n: int
    horizon: str = ""
    undefined_at: list | None = None

    def to_dict(self) -> dict:
        return {"mae": self.mae, "mape": self.mape, "n": self.n, "horizon": self.horizon}


def metrics(y, y_hat, horizon: str = "") -> MetricsReport:
    """All metrics at once; MAPE and RE are left unset (with indices) if any ``y == 0``."""
    y, y_hat = _pair(y, y_hat)
    err = mae(y, y_hat)
    try:
        re = relative_errors(y, y_hat)
    except MetricsError as exc:
        return MetricsReport(err, None, None, y.size, horizon, exc.indices)
    return MetricsReport(err, float(np.mean(np.abs((y - y_hat) / y)) * 100.0), re, y.size, horizon)
