"""Year-range dataset splits: forecaster-train, EC-train/validation, test."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embedding import EmbeddedSeries
from .windows import HISTORY, HORIZON, WindowSet, build_windows


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


@dataclass(frozen=True)
class TimeRange:
    start: np.datetime64  # inclusive
    end: np.datetime64  # exclusive
    label: str

    def overlaps(self, other: "TimeRange") -> bool:
        return self.start < other.end and other.start < self.end

    def rows(self, timestamps: np.ndarray) -> tuple[int, int]:
        lo = int(np.searchsorted(timestamps, self.start, side="left"))
        hi = int(np.searchsorted(timestamps, self.end, side="left"))
        return lo, hi


def parse_range(value) -> TimeRange:
    """``"2018"``, ``"2015-2017"`` (years, inclusive) or ``"start..end"`` (ISO, end exclusive)."""
    text = str(value).strip()
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            start, end = np.datetime64(a.strip(), "s"), np.datetime64(b.strip(), "s")
        else:
            parts = text.split("-")
            if len(parts) == 1:
                y0 = y1 = int(parts[0])
            elif len(parts) == 2:
                y0, y1 = int(parts[0]), int(parts[1])
            else:
                raise ValueError(text)
            start = np.datetime64(f"{y0:04d}-01-01", "s")
            end = np.datetime64(f"{y1 + 1:04d}-01-01", "s")
    except ValueError:
        raise ConfigError(f"cannot parse range {text!r}; use YYYY, YYYY-YYYY or start..end") from None
    if not end > start:
        raise ConfigError(f"range {text!r} is empty")
    return TimeRange(start, end, text)


@dataclass
class DatasetSplit:
    train: WindowSet  # stride 1
    ec_train: WindowSet  # stride 24
    validation: WindowSet  # stride 24
    test: WindowSet  # stride 24
    ec_pool: WindowSet  # the full, time-ordered EC-year windows
    ec_train_idx: np.ndarray
    validation_idx: np.ndarray


def partition(n: int, seed: int, fraction: float = 0.8) -> tuple[np.ndarray, np.ndarray]:
    """Seeded random split of ``range(n)`` into sorted (train, validation) index arrays."""
    rng = np.random.Generator(np.random.PCG64(seed))
    perm = rng.permutation(n)
    k = int(round(fraction * n))
    return np.sort(perm[:k]), np.sort(perm[k:])


def make_splits(
    series: EmbeddedSeries,
    train_range,
    ec_range,
    test_range,
    seed: int = 0,
    train_stride: int = 1,
    eval_stride: int = HORIZON,
    history: int = HISTORY,
    horizon: int = HORIZON,
    ec_fraction: float = 0.8,
) -> DatasetSplit:
    ranges = [r if isinstance(r, TimeRange) else parse_range(r) for r in (train_range, ec_range, test_range)]
    names = ("train", "ec", "test")
    for a in range(3):
        for b in range(a + 1, 3):
            if ranges[a].overlaps(ranges[b]):
                raise ConfigError(f"{names[a]} range {ranges[a].label!r} overlaps {names[b]} range {ranges[b].label!r}")

    def windows(r: TimeRange, stride: int) -> WindowSet:
        lo, hi = r.rows(series.timestamps)
        return build_windows(series, stride, history, horizon, lo=lo, hi=hi)

    train = windows(ranges[0], train_stride)
    pool = windows(ranges[1], eval_stride)
    test = windows(ranges[2], eval_stride)
    tr, va = partition(len(pool), seed, ec_fraction)
    return DatasetSplit(train, pool.subset(tr), pool.subset(va), test, pool, tr, va)
