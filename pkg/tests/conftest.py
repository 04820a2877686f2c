import numpy as np
import pytest

from stlf import dataio
from stlf.forecaster import ForecastModel, ModelConfig

TINY = dict(n_features=5, hidden=4, days=3, day_len=4, fw_hidden=3, att_hidden=3, out_hidden=3)
HIST, HOR = 12, 4


def tiny_series(N=240, seed=0, mean=500.0, std=20.0):
    """A small standardized stream with a daily (4-step) pattern."""
    rng = np.random.default_rng(seed)
    t = np.arange(N)
    ts = (np.datetime64("2020-01-01T00", "h") + t * np.timedelta64(1, "h")).astype("datetime64[s]")
    feats = rng.normal(size=(N, 5))
    feats[:, 0] = np.sin(2 * np.pi * t / 4)
    target = 0.8 * feats[:, 0] + 0.1 * rng.normal(size=N)
    stats = dataio.FeatureStats({}, {}, mean, std)
    return dataio.EmbeddedSeries(ts, feats, target, stats, [f"f{k}" for k in range(5)])


def tiny_windows(series, stride=4, lo=0, hi=None):
    return dataio.build_windows(series, stride, HIST, HOR, lo=lo, hi=hi)


def tiny_model(cell="gru", seed=0, **kw):
    return ForecastModel.init(ModelConfig(cell=cell, **{**TINY, **kw}), seed=seed)


@pytest.fixture
def series():
    return tiny_series()


# acceptance criteria report a one-line verdict each; printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
