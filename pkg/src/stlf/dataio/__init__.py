"""Ingestion, gap repair, embedding, windowing and splits."""

from .embedding import (
    EmbeddedSeries,
    FeatureStats,
    calendar_codes,
    destandardize,
    embed_features,
    fit_stats,
    one_hot,
    standardize,
)
from .loading import DataError, RawSeries, interpolate_missing, load_csv
from .schema import FeatureSchema, FeatureSpec, SchemaError, custom, get_schema, iso_ne, nau
from .splits import ConfigError, DatasetSplit, TimeRange, make_splits, parse_range, partition
from .synthetic import SynthConfig, generate, synth_schema, write_synthetic
from .windows import HISTORY, HORIZON, WindowSample, WindowSet, build_windows, window_count

__all__ = [
    "ConfigError",
    "DataError",
    "DatasetSplit",
    "EmbeddedSeries",
    "FeatureSchema",
    "FeatureSpec",
    "FeatureStats",
    "HISTORY",
    "HORIZON",
    "RawSeries",
    "SchemaError",
    "SynthConfig",
    "TimeRange",
    "WindowSample",
    "WindowSet",
    "build_windows",
    "calendar_codes",
    "custom",
    "destandardize",
    "embed_features",
    "fit_stats",
    "generate",
    "get_schema",
    "interpolate_missing",
    "iso_ne",
    "load_csv",
    "make_splits",
    "nau",
    "one_hot",
    "parse_range",
    "partition",
    "standardize",
    "synth_schema",
    "window_count",
]


def prepare_series(path, schema: FeatureSchema, train_range, holidays=()) -> EmbeddedSeries:
    """Load, repair and embed a CSV with stats fitted on ``train_range`` rows."""
    raw = interpolate_missing(load_csv(path, schema))
    r = parse_range(train_range) if not isinstance(train_range, TimeRange) else train_range
    lo, hi = r.rows(raw.timestamps)
    stats = fit_stats(raw, schema, slice(lo, hi))
    return embed_features(raw, schema, stats, holidays)


__all__.append("prepare_series")
