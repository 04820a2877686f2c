"""Exhaustive grid search ranked by validation MAE."""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field, fields

from ..dataio.splits import ConfigError, DatasetSplit
from ..forecaster import ForecastModel
from .config import TrainConfig
from .loop import train_forecaster


@dataclass
class GridSpec:
    axes: dict[str, list]
    metric: str = "val_mae"

    def __post_init__(self):
        if not self.axes or any(len(v) == 0 for v in self.axes.values()):
            raise ConfigError("grid must have at least one value on every axis")
        known = {f.name for f in fields(TrainConfig)}
        bad = [k for k in self.axes if k not in known]
        if bad:
            raise ConfigError(f"unknown grid axes: {bad}")

    def combinations(self) -> list[dict]:
        keys = list(self.axes)
        return [dict(zip(keys, values)) for values in itertools.product(*(self.axes[k] for k in keys))]


@dataclass
class GridRun:
    params: dict
    val_mae: float = math.nan
    error: str | None = None
    rank: int | None = None
    model: ForecastModel | None = field(default=None, repr=False)


@dataclass
class GridResult:
    runs: list[GridRun]
    best: GridRun | None

    def write_csv(self, path) -> None:
        keys = list(self.runs[0].params) if self.runs else []
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(keys + ["val_mae", "rank", "status"])
            for r in self.runs:
                status = "ok" if r.error is None else f"failed: {r.error}"
                w.writerow([r.params[k] for k in keys] + [repr(r.val_mae), "" if r.rank is None else r.rank, status])


def grid_search(spec: GridSpec, split: DatasetSplit, base: TrainConfig, on_run=None) -> GridResult:
    """Train one forecaster per combination with ``base.seed``; failures are recorded, not raised."""
    runs = []
    for combo in spec.combinations():
        run = GridRun(combo)
        try:
            cfg = base.with_(**combo)
            model = ForecastModel.init(cfg.model_for(split.train), seed=cfg.seed)
            model, hist = train_forecaster(model, split.train, split.validation, cfg)
            run.val_mae, run.model = hist.best_val_mae, model
        except Exception as exc:  # noqa: BLE001 - one bad combination must not end the search
            run.error = f"{type(exc).__name__}: {exc}"
        runs.append(run)
        if on_run is not None:
            on_run(run)
    ok = sorted((r for r in runs if r.error is None), key=lambda r: r.val_mae)
    for rank, r in enumerate(ok, 1):
        r.rank = rank
    return GridResult(runs, ok[0] if ok else None)
