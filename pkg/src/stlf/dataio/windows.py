"""Sliding-window samples over an embedded series.

Windows are stored as start offsets into the shared feature stream, so a
stride-1 year of hourly data does not materialise ~8.5k copies of a
192-row matrix. Indexing yields :class:`WindowSample` objects; ``batch``
gathers stacked arrays for training.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .embedding import EmbeddedSeries

HISTORY = 168
HORIZON = 24


@dataclass
class WindowSample:
    X: np.ndarray  # (T_h + T_f, n)
    y_h: np.ndarray  # (T_h,) standardized
    y_f: np.ndarray  # (T_f,) standardized
    start: int


class WindowSet:
    def __init__(self, series: EmbeddedSeries, starts, history: int = HISTORY, horizon: int = HORIZON):
        self.series = series
        self.starts = np.asarray(starts, dtype=np.int64)
        self.history = history
        self.horizon = horizon

    @property
    def length(self) -> int:
        return self.history + self.horizon

    def __len__(self) -> int:
        return len(self.starts)

    def __getitem__(self, i: int) -> WindowSample:
        s = int(self.starts[i])
        L, T_h = self.length, self.history
        return WindowSample(
            X=self.series.features[s : s + L],
            y_h=self.series.target[s : s + T_h],
            y_f=self.series.target[s + T_h : s + L],
            start=s,
        )

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def subset(self, idx) -> "WindowSet":
        return WindowSet(self.series, self.starts[np.asarray(idx, dtype=np.int64)], self.history, self.horizon)

    def _rows(self, idx) -> np.ndarray:
        idx = np.arange(len(self)) if idx is None else np.asarray(idx, dtype=np.int64)
        return self.starts[idx][:, None] + np.arange(self.length)[None, :]

    def batch(self, idx=None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(X, history input, future target)`` stacked for the given windows."""
        rows = self._rows(idx)
        y = self.series.target[rows]
        return self.series.features[rows], y[:, : self.history], y[:, self.history :]

    # evaluation in MW; an error-sample set overrides these

    def to_mw(self, pred_std: np.ndarray, idx=None) -> np.ndarray:
        st = self.series.stats
        return np.asarray(pred_std) * st.target_std + st.target_mean

    def truth_mw(self, idx=None) -> np.ndarray:
        rows = self._rows(idx)[:, self.history :]
        return self.series.target_mw[rows]

    def future_timestamps(self, i: int) -> np.ndarray:
        s = int(self.starts[i]) + self.history
        return self.series.timestamps[s : s + self.horizon]


def window_count(N: int, stride: int, length: int = HISTORY + HORIZON) -> int:
    return 0 if N < length else (N - length) // stride + 1


def build_windows(
    series: EmbeddedSeries,
    stride: int,
    history: int = HISTORY,
    horizon: int = HORIZON,
    lo: int = 0,
    hi: int | None = None,
    strict: bool = False,
) -> WindowSet:
    """Windows fully inside rows ``[lo, hi)`` starting at ``lo, lo+stride, ...``."""
    if stride < 1:
        raise ValueError("stride must be positive")
    hi = len(series) if hi is None else hi
    length = history + horizon
    N = hi - lo
    if N < length:
        msg = f"range of {N} rows is shorter than one {length}-row window"
        if strict:
            raise ValueError(msg)
        warnings.warn(msg, stacklevel=2)
        return WindowSet(series, np.zeros(0, dtype=np.int64), history, horizon)
    starts = lo + np.arange(window_count(N, stride, length)) * stride
    return WindowSet(series, starts, history, horizon)
