"""CSV ingestion and gap repair for hourly load series."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd

from .schema import FeatureSchema

HOUR = np.timedelta64(1, "h")


class DataError(ValueError):
    """Malformed or inconsistent input data."""


@dataclass
class RawSeries:
    timestamps: np.ndarray  # datetime64[s], strictly increasing
    target: np.ndarray  # MW, NaN marks a gap
    numeric: dict[str, np.ndarray] = field(default_factory=dict)
    categorical: dict[str, np.ndarray] = field(default_factory=dict)  # float codes, NaN = gap

    def __len__(self) -> int:
        return len(self.timestamps)


def load_csv(path: str | Path, schema: FeatureSchema) -> RawSeries:
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    expected = [schema.timestamp, schema.target] + schema.file_columns
    for col in frame.columns:
        if col not in expected:
            raise DataError(f"{path}: unknown column {col!r} (schema {schema.name!r} expects {expected})")
    for col in expected:
        if col not in frame.columns:
            raise DataError(f"{path}: missing column {col!r}")

    try:
        stamps = pd.to_datetime(frame[schema.timestamp], format="ISO8601")
    except (ValueError, TypeError) as exc:
        raise DataError(f"{path}: unparseable timestamp ({exc})") from None
    if getattr(stamps.dt, "tz", None) is not None:
        stamps = stamps.dt.tz_localize(None)
    ts = stamps.to_numpy().astype("datetime64[s]")

    def column(name: str) -> np.ndarray:
        raw = frame[name].str.strip()
        values = pd.to_numeric(raw.replace("", np.nan), errors="coerce").to_numpy(dtype=np.float64)
        bad = np.isnan(values) & (raw != "").to_numpy() & ~raw.str.lower().isin(["nan", "na"]).to_numpy()
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            raise DataError(f"{path}: unparseable value {raw.iloc[row]!r} in column {name!r} at data row {row + 1}")
        return values

    order = np.argsort(ts, kind="stable")
    ts = ts[order]
    dup = np.flatnonzero(ts[1:] == ts[:-1])
    if dup.size:
        raise DataError(f"{path}: duplicate timestamp {ts[dup[0]]}")
    return RawSeries(
        timestamps=ts,
        target=column(schema.target)[order],
        numeric={c: column(c)[order] for c in schema.numeric_sources},
        categorical={c: column(c)[order] for c in schema.categorical_sources},
    )


def _fill_linear(name: str, values: np.ndarray) -> np.ndarray:
    missing = np.isnan(values)
    if not missing.any():
        return values
    if missing[0] or missing[-1]:
        raise DataError(f"column {name!r} has a leading or trailing gap; cannot extrapolate")
    idx = np.arange(len(values))
    out = values.copy()
    out[missing] = np.interp(idx[missing], idx[~missing], values[~missing])
    return out


def _fill_previous(name: str, values: np.ndarray) -> np.ndarray:
    if np.isnan(values[0]):
        raise DataError(f"categorical column {name!r} starts with a gap")
    return pd.Series(values).ffill().to_numpy()


def interpolate_missing(series: RawSeries) -> RawSeries:
    """Reindex onto a full hourly grid and fill interior gaps.

    Numeric columns (and the target) are interpolated linearly in time;
    categorical codes carry the previous value forward.
    """
    ts = series.timestamps
    if len(ts) == 0:
        raise DataError("empty series")
    offsets = (ts - ts[0]) / HOUR
    if not np.allclose(offsets, np.round(offsets)):
        raise DataError("timestamps are not on an hourly grid")
    pos = np.round(offsets).astype(np.int64)
    N = int(pos[-1]) + 1
    grid = ts[0] + np.arange(N) * HOUR

    def spread(values: np.ndarray) -> np.ndarray:
        full = np.full(N, np.nan)
        full[pos] = values
        return full

    return replace(
        series,
        timestamps=grid.astype("datetime64[s]"),
        target=_fill_linear("target", spread(series.target)),
        numeric={k: _fill_linear(k, spread(v)) for k, v in series.numeric.items()},
        categorical={k: _fill_previous(k, spread(v)) for k, v in series.categorical.items()},
    )
