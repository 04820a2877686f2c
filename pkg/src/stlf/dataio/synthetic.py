"""Seeded synthetic hourly load with one informative and one noise covariate."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .schema import FeatureSchema, custom

SYNTH_COLUMNS = ("temperature", "noise")


@dataclass(frozen=True)
class SynthConfig:
    days: int = 730
    start: str = "2017-01-01"
    seed: int = 0
    base: float = 1000.0
    daily_amp: float = 150.0
    weekly_amp: float = 60.0
    temp_coef: float = 12.0  # MW per degree away from the comfort point
    comfort: float = 18.0
    ar_coef: float = 0.0  # AR(1) coefficient of the structured residual
    ar_sigma: float = 0.0
    noise_sigma: float = 5.0


def synth_schema() -> FeatureSchema:
    return custom(list(SYNTH_COLUMNS), name="synth")


def generate(cfg: SynthConfig = SynthConfig()) -> pd.DataFrame:
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    N = cfg.days * 24
    ts = np.datetime64(cfg.start, "h") + np.arange(N) * np.timedelta64(1, "h")
    t = np.arange(N, dtype=np.float64)
    hour = t % 24
    dow = ((ts.astype("datetime64[D]").astype(np.int64) + 3) % 7).astype(np.float64)
    doy = t / 24.0

    # temperature: annual + diurnal cycle with smooth weather noise
    weather = np.zeros(N)
    shocks = rng.normal(0.0, 0.6, N)
    for k in range(1, N):
        weather[k] = 0.97 * weather[k - 1] + shocks[k]
    temperature = (
        12.0 - 10.0 * np.cos(2 * np.pi * (doy - 15) / 365.25) - 4.0 * np.cos(2 * np.pi * (hour - 3) / 24) + weather
    )

    daily = cfg.daily_amp * (0.6 * np.sin(2 * np.pi * (hour - 8) / 24) + 0.4 * np.sin(4 * np.pi * (hour - 5) / 24))
    weekly = np.where(dow >= 5, -cfg.weekly_amp, cfg.weekly_amp * 0.4 * np.sin(np.pi * dow / 4))
    load = cfg.base + daily + weekly + cfg.temp_coef * np.abs(temperature - cfg.comfort)

    if cfg.ar_sigma > 0:
        ar = np.zeros(N)
        eps = rng.normal(0.0, cfg.ar_sigma, N)
        for k in range(1, N):
            ar[k] = cfg.ar_coef * ar[k - 1] + eps[k]
        load = load + ar
    load = load + rng.normal(0.0, cfg.noise_sigma, N)

    return pd.DataFrame(
        {
            "timestamp": np.datetime_as_string(ts, unit="s"),
            "load_mw": load,
            "temperature": temperature,
            "noise": rng.normal(0.0, 1.0, N),
        }
    )


def write_synthetic(path: str | Path, cfg: SynthConfig = SynthConfig()) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    generate(cfg).to_csv(path, index=False, float_format="%.6f")
    return path
