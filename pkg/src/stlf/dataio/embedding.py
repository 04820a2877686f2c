"""Calendar derivation, one-hot embedding and standardization."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .loading import DataError, RawSeries
from .schema import BINARY, NUMERIC, ONEHOT, FeatureSchema

# Dec-Feb winter, Mar-May spring, Jun-Aug summer, Sep-Nov autumn
_SEASON_OF_MONTH = np.array([0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3, 0])


@dataclass
class FeatureStats:
    mean: dict[str, float]
    std: dict[str, float]
    target_mean: float
    target_std: float

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std, "target_mean": self.target_mean, "target_std": self.target_std}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureStats":
        return cls(dict(d["mean"]), dict(d["std"]), float(d["target_mean"]), float(d["target_std"]))


@dataclass
class EmbeddedSeries:
    """The (N, n) feature stream with standardized target, aligned by row."""

    timestamps: np.ndarray
    features: np.ndarray
    target: np.ndarray  # standardized
    stats: FeatureStats
    columns: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.timestamps)

    @property
    def target_mw(self) -> np.ndarray:
        return destandardize(self.target, self.stats.target_mean, self.stats.target_std)


def standardize(x, mean: float, std: float) -> np.ndarray:
    return (np.asarray(x, dtype=np.float64) - mean) / std


def destandardize(z, mean: float, std: float) -> np.ndarray:
    return np.asarray(z, dtype=np.float64) * std + mean


def fit_stats(series: RawSeries, schema: FeatureSchema, rows: slice | np.ndarray | None = None) -> FeatureStats:
    """Per-column mean and population std over ``rows`` (the forecaster-train range)."""
    sel = slice(None) if rows is None else rows

    def moments(name: str, values: np.ndarray) -> tuple[float, float]:
        v = values[sel]
        if v.size == 0:
            raise DataError("no rows to fit standardization statistics on")
        std = float(np.std(v))
        if not std > 0:
            raise DataError(f"column {name!r} is constant over the training range (std = 0)")
        return float(np.mean(v)), std

    mean, std = {}, {}
    for col in schema.numeric_sources:
        mean[col], std[col] = moments(col, series.numeric[col])
    t_mean, t_std = moments(schema.target, series.target)
    return FeatureStats(mean, std, t_mean, t_std)


def calendar_codes(timestamps: np.ndarray, holidays: Iterable = ()) -> dict[str, np.ndarray]:
    ts = np.asarray(timestamps).astype("datetime64[h]")
    days = ts.astype("datetime64[D]")
    hour = (ts - days).astype(np.int64)
    # 1970-01-01 was a Thursday; shift so Monday = 0
    dow = (days.astype(np.int64) + 3) % 7
    month = (days.astype("datetime64[M]").astype(np.int64) % 12).astype(np.int64)
    holiday_days = np.array(sorted({np.datetime64(str(d)[:10], "D") for d in holidays}), dtype="datetime64[D]")
    return {
        "hour": hour,
        "dow": dow,
        "month": month,
        "season": _SEASON_OF_MONTH[month],
        "weekday": (dow < 5).astype(np.float64),
        "holiday": np.isin(days, holiday_days).astype(np.float64),
    }


def one_hot(codes: np.ndarray, width: int, name: str = "feature") -> np.ndarray:
    codes = np.asarray(codes)
    if np.any(codes != np.round(codes)) or codes.min(initial=0) < 0 or codes.max(initial=0) >= width:
        raise DataError(f"{name}: codes must be integers in [0, {width})")
    out = np.zeros((codes.size, width))
    out[np.arange(codes.size), codes.astype(np.int64)] = 1.0
    return out


def embed_features(
    series: RawSeries,
    schema: FeatureSchema,
    stats: FeatureStats,
    holidays: Iterable = (),
) -> EmbeddedSeries:
    cal = calendar_codes(series.timestamps, holidays)
    blocks = []
    for f in schema.features:
        if f.derived:
            raw = cal[f.source.split(":", 1)[1]]
        elif f.kind == NUMERIC:
            raw = series.numeric[f.source]
        else:
            raw = series.categorical[f.source]
        if f.kind == NUMERIC:
            blocks.append(standardize(raw, stats.mean[f.source], stats.std[f.source])[:, None])
        elif f.kind == BINARY:
            if not np.all((raw == 0) | (raw == 1)):
                raise DataError(f"indicator {f.name!r} must be 0 or 1")
            blocks.append(np.asarray(raw, dtype=np.float64)[:, None])
        elif f.kind == ONEHOT:
            blocks.append(one_hot(raw, f.width, f.name))
    features = np.concatenate(blocks, axis=1) if blocks else np.zeros((len(series), 0))
    return EmbeddedSeries(
        timestamps=series.timestamps,
        features=features,
        target=standardize(series.target, stats.target_mean, stats.target_std),
        stats=stats,
        columns=schema.column_names(),
    )
