"""Acceptance criteria, each asserted at its stated tolerance.

Every test records a ``PASS``/``FAIL`` line that is printed in the pytest
terminal summary (and immediately when run with ``-s``).
"""

import os
import time

import numpy as np
import pytest

import oracle
from conftest import ACCEPTANCE_LINES
from stlf import dataio
from stlf import numcore as nc
from stlf.errcorrect import compute_residuals, corrected_forecasts, param_checksum, train_correction, transfer_init
from stlf.evalcli import load_checkpoint, mae, mape, metrics, save_checkpoint
from stlf.evalcli.checkpoint import encode_checkpoint
from stlf.featweight import FeatureWeighterParams, score_features, weight_trace
from stlf.forecaster import (
    ForecastModel,
    ModelConfig,
    RecurrentCellParams,
    TemporalAttentionParams,
    attention_scores,
    forecast,
    similar_day_weights,
)
from stlf.numcore import Tensor
from stlf.trainer import TrainConfig, fit, train_forecaster

TINY = ModelConfig(n_features=5, hidden=4, days=3, day_len=4, fw_hidden=3, att_hidden=3, out_hidden=3, cell="lstm")


def verdict(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {number:>2}. {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def tiny_problem(cfg, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(2, cfg.window, cfg.n_features))
    hist = rng.normal(size=(2, cfg.history))
    target = rng.normal(size=(2, cfg.horizon))
    return X, hist, target


def load_synthetic(tmp_path_factory, name, **kw):
    path = tmp_path_factory.mktemp(name) / "synth.csv"
    return dataio.write_synthetic(path, dataio.SynthConfig(**kw))


# 1 ---------------------------------------------------------------------------


def test_01_gradient_correctness():
    t0 = time.perf_counter()
    detail, worst = [], 0.0

    forecaster = ForecastModel.init(TINY, seed=11)
    X, hist, target = tiny_problem(TINY, 12)
    ec = transfer_init(forecaster)
    e_h = np.random.default_rng(13).normal(size=hist.shape)

    for label, model, channel in (("forecaster", forecaster, hist), ("EC", ec, e_h)):

        def loss(model=model, channel=channel):
            return nc.mean(nc.square(nc.sub(model.forward(X, channel).y, target)))

        def reference(model=model, channel=channel):
            # difference quotients from an independent long-double implementation
            params = {k: t.data for k, t in model.named_parameters().items()}
            y = oracle.oracle_batch(params, TINY.cell, TINY.days, TINY.day_len, X, channel, dtype=np.longdouble)
            return np.mean((y - target) ** 2)

        per_param = {}
        err = nc.gradient_check(loss, model.trainable_parameters(), reference=reference, report=per_param)
        groups = {k.split(".")[0] for k in per_param}
        if label == "EC":
            assert "weighter" not in groups
        worst = max(worst, err)
        detail.append(f"{label} max rel err {err:.2e} over {len(per_param)} tensors")
    elapsed = time.perf_counter() - t0
    verdict(1, "gradient correctness", worst < 1e-5 and elapsed < 60, "; ".join(detail) + f"; {elapsed:.1f}s")


# 2 ---------------------------------------------------------------------------


def test_02_normalisation_invariants():
    rng = np.random.default_rng(2)
    worst = {"alpha": 0.0, "gamma": 0.0, "beta": 0.0}
    n, M, t_d, d = 6, 3, 4, 5
    for _ in range(1000):
        scale = 10 ** rng.uniform(-2, 1.5)
        x = rng.normal(size=(n,)) * scale
        wp = FeatureWeighterParams.init(n, 4, rng)
        for t in wp.named().values():
            t.data *= rng.uniform(0.1, 5)
        a = score_features(x, wp).alpha.data
        worst["alpha"] = max(worst["alpha"], abs(a.sum() - 1))

        days, fut = rng.normal(size=(M, t_d, n)) * scale, rng.normal(size=(t_d, n)) * scale
        g = similar_day_weights(days, fut).gamma
        worst["gamma"] = max(worst["gamma"], abs(g.sum() - 1))

        ap = TemporalAttentionParams.init(d + n, 4, M * t_d, rng)
        b = attention_scores(rng.normal(size=(1, d)) * scale, rng.normal(size=(1, n)), ap).data
        worst["beta"] = max(worst["beta"], abs(b.sum() - 1))
    ok = all(v <= 1e-9 for v in worst.values())
    verdict(2, "normalisation invariants", ok, ", ".join(f"max|sum {k} - 1| = {v:.1e}" for k, v in worst.items()))


# 3 ---------------------------------------------------------------------------


def test_03_oracle_equivalence():
    worst = 0.0

    class Sample:
        pass

    for cell in ("lstm", "gru"):
        cfg = ModelConfig(**{**TINY.to_dict(), "cell": cell})
        for seed in range(3):
            model = ForecastModel.init(cfg, seed=seed)
            model.target_mean, model.target_std = 0.0, 1.0
            X, hist, _ = tiny_problem(cfg, 100 + seed)
            params = {k: t.data for k, t in model.named_parameters().items()}
            for b in range(len(X)):
                s = Sample()
                s.X, s.y_h = X[b], hist[b]
                ref = oracle.oracle_forecast(params, cell, cfg.days, cfg.day_len, X[b], hist[b])
                worst = max(worst, float(np.max(np.abs(forecast(s, model) - ref))))

    rng = np.random.default_rng(3)
    cell_worst = 0.0
    for _ in range(50):
        c = RecurrentCellParams.init("gru", 3, 4, rng)
        x, h = rng.normal(size=3), rng.normal(size=4)
        out, _ = c.step(Tensor(x[None]), Tensor(h[None]))
        ref = oracle.gru_step_scalar(c.W_x.data.tolist(), c.W_h.data.tolist(), c.b_x.data.tolist(),
                                     c.b_h.data.tolist(), x.tolist(), h.tolist())
        cell_worst = max(cell_worst, float(np.max(np.abs(out.data[0] - ref))))
    ok = worst <= 1e-12 and cell_worst <= 1e-12
    verdict(3, "oracle equivalence", ok, f"forecast max abs diff {worst:.1e}; GRU step max abs diff {cell_worst:.1e}")


# 4 ---------------------------------------------------------------------------


def test_04_feature_weight_discrimination(tmp_path_factory):
    t0 = time.perf_counter()
    path = load_synthetic(tmp_path_factory, "c4", days=240, start="2017-01-01", seed=0)
    series = dataio.prepare_series(path, dataio.synth_schema(), "2017-01-01..2017-06-01")
    ws = dataio.build_windows(series, 24)
    train, val = ws.subset(np.arange(120)), ws.subset(np.arange(120, len(ws)))
    cfg = TrainConfig(epochs=120, batch_size=64, hidden=32, cell="gru", seed=0)
    model = ForecastModel.init(cfg.model_for(ws), seed=0)
    model, hist = train_forecaster(model, train, val, cfg)
    X, _, _ = val.batch()
    alpha = weight_trace(X, model.weighter)
    cols = series.columns
    a_temp, a_noise = alpha[..., cols.index("temperature")].mean(), alpha[..., cols.index("noise")].mean()
    elapsed = time.perf_counter() - t0
    ok = a_noise < a_temp and elapsed < 300 and len(hist.records) <= 300
    verdict(
        4,
        "feature-weighting discrimination",
        ok,
        f"mean alpha temperature {a_temp:.4f} vs noise {a_noise:.4f} after {len(hist.records)} epochs, {elapsed:.0f}s",
    )


# 5 ---------------------------------------------------------------------------


def test_05_overfit_capability(tmp_path_factory):
    t0 = time.perf_counter()
    path = load_synthetic(tmp_path_factory, "c5", days=120, start="2017-01-01", seed=0)
    series = dataio.prepare_series(path, dataio.synth_schema(), "2017")
    windows = dataio.build_windows(series, 24).subset(np.arange(20))
    # the default x0.1-every-30-epochs decay leaves ~60 useful steps on a
    # single batch of 20; memorisation runs at a constant rate on batches of 5
    cfg = TrainConfig(epochs=500, batch_size=5, hidden=32, cell="lstm", seed=0, patience=500, lr=0.003, lr_factor=1.0)
    model = ForecastModel.init(cfg.model_for(windows), seed=0)
    # the 20 training windows double as the monitored set, so val_mape is train MAPE
    model, hist = fit(model, windows, windows, cfg, stop_when=lambda r: r.val_mape < 1.0)
    pred = windows.to_mw(model.predict(*windows.batch()[:2]))
    train_mape = mape(windows.truth_mw(), pred)
    elapsed = time.perf_counter() - t0
    ok = train_mape < 1.0 and len(hist.records) <= 500 and elapsed < 300
    verdict(5, "overfit capability", ok, f"train MAPE {train_mape:.3f}% after {len(hist.records)} epochs, {elapsed:.0f}s")


# 6 ---------------------------------------------------------------------------


def test_06_error_correction_direction(tmp_path_factory):
    path = load_synthetic(tmp_path_factory, "c6", days=730, start="2017-01-01", seed=0, ar_coef=0.95, ar_sigma=15.0)
    series = dataio.prepare_series(path, dataio.synth_schema(), "2017")
    split = dataio.make_splits(
        series, "2017-01-01..2018-01-01", "2018-01-01..2018-12-24", "2018-12-24..2019-01-01", seed=0, train_stride=24
    )
    cfg = TrainConfig(epochs=8, batch_size=64, hidden=16, cell="gru", seed=0)
    forecaster = ForecastModel.init(cfg.model_for(split.train), seed=0)
    forecaster, _ = train_forecaster(forecaster, split.train, split.validation, cfg)

    errors = compute_residuals(forecaster, split.ec_pool)
    pos = {int(s): k for k, s in enumerate(errors.windows.starts)}
    ec_train = errors.subset([pos[int(s)] for s in split.ec_train.starts if int(s) in pos])
    ec_val = errors.subset([pos[int(s)] for s in split.validation.starts if int(s) in pos])

    f_sum, w_sum = param_checksum(forecaster), param_checksum(forecaster, "weighter")
    correction = transfer_init(forecaster)
    sums = []
    correction, _ = train_correction(
        correction, ec_train, ec_val, cfg,
        on_epoch=lambda r: sums.append((param_checksum(correction, "weighter"), param_checksum(forecaster))),
    )
    y_hat, y_bar = corrected_forecasts(forecaster, correction, ec_val)
    truth = ec_val.truth_mw()
    before, after = mae(truth, y_hat), mae(truth, y_bar)
    frozen = all(s == (w_sum, f_sum) for s in sums) and param_checksum(correction, "weighter") == w_sum
    ok = after <= before and frozen and param_checksum(forecaster) == f_sum
    verdict(6, "error-correction direction", ok,
            f"validation MAE {before:.2f} -> {after:.2f} MW; checksums constant over {len(sums)} EC epochs: {frozen}")


# 7 ---------------------------------------------------------------------------


def test_07_metrics_exactness():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 300))
        y = rng.uniform(50, 3000, n)
        p = y + rng.normal(0, 80, n)
        abs_sum = pct_sum = 0.0
        re = []
        for i in range(n):
            diff = abs(y[i] - p[i])
            abs_sum += diff
            pct_sum += diff / abs(y[i])
            re.append(diff / y[i] * 100.0)
        r = metrics(y, p)
        worst = max(worst, abs(r.mae - abs_sum / n), abs(r.mape - pct_sum / n * 100.0),
                    float(np.max(np.abs(r.re - np.array(re)))))
    ex_mae, ex_mape = mae([100, 200], [110, 180]), mape([100, 200], [110, 180])
    ok = worst <= 1e-12 and abs(ex_mae - 15.0) <= 1e-12 and abs(ex_mape - 10.0) <= 1e-12
    verdict(7, "metrics exactness", ok, f"max diff vs brute force {worst:.1e}; example MAE {ex_mae:g}, MAPE {ex_mape:g}%")


# 8 ---------------------------------------------------------------------------


def test_08_window_construction():
    def stream(N):
        ts = (np.datetime64("2020-01-01T00", "h") + np.arange(N) * np.timedelta64(1, "h")).astype("datetime64[s]")
        return dataio.EmbeddedSeries(ts, np.zeros((N, 1)), np.zeros(N), dataio.FeatureStats({}, {}, 0.0, 1.0))

    mismatches = 0
    for stride in (1, 24):
        for N in range(192, 1001):
            offsets = []
            s = 0
            while s + 192 <= N:
                offsets.append(s)
                s += stride
            ws = dataio.build_windows(stream(N), stride)
            mismatches += ws.starts.tolist() != offsets
    big = len(dataio.build_windows(stream(8760), 24))
    verdict(8, "window construction", mismatches == 0 and big == 358,
            f"{mismatches} mismatches over N in [192, 1000] x strides {{1, 24}}; N=8760 stride 24 -> {big}")


# 9 ---------------------------------------------------------------------------


def test_09_determinism_and_persistence(tmp_path):
    s = dataio.EmbeddedSeries(
        (np.datetime64("2020-01-01T00", "h") + np.arange(300) * np.timedelta64(1, "h")).astype("datetime64[s]"),
        np.random.default_rng(0).normal(size=(300, 5)),
        np.sin(np.arange(300) / 4.0),
        dataio.FeatureStats({}, {}, 100.0, 10.0),
    )
    ws = dataio.build_windows(s, 1, history=12, horizon=4)
    cfg = TrainConfig(epochs=3, batch_size=32, hidden=4, cell="lstm", fw_hidden=3, att_hidden=3, out_hidden=3, seed=7)
    blobs = []
    for run in range(2):
        model = ForecastModel.init(cfg.model_for(ws), seed=cfg.seed)
        model, _ = train_forecaster(model, ws, ws, cfg)
        blobs.append(encode_checkpoint(model, s.stats))
    path = save_checkpoint(model, tmp_path / "m.lfck", s.stats)
    back = load_checkpoint(path).models["forecaster"]
    X, hist, _ = ws.batch()
    same = bool((back.predict(X, hist) == model.predict(X, hist)).all())
    ok = blobs[0] == blobs[1] and same
    verdict(9, "determinism and persistence", ok,
            f"checkpoints identical: {blobs[0] == blobs[1]} ({len(blobs[0])} bytes); reload forecasts bit-identical: {same}")


# 10 --------------------------------------------------------------------------


def test_10_complexity_linear_in_history():
    rng = np.random.default_rng(10)
    T_h = np.array([168, 336, 672])
    times = []
    for days in (7, 14, 28):
        cfg = ModelConfig(n_features=52, hidden=32, cell="lstm", days=days)
        model = ForecastModel.init(cfg, seed=0)
        X = rng.normal(size=(16, cfg.window, cfg.n_features))
        hist = rng.normal(size=(16, cfg.history))
        model.predict(X, hist)
        runs = []
        for _ in range(5):
            t = time.perf_counter()
            model.predict(X, hist)
            runs.append(time.perf_counter() - t)
        times.append(min(runs))
    slope = float(np.polyfit(np.log(T_h), np.log(times), 1)[0])
    verdict(10, "complexity linear in T_h", 0.8 <= slope <= 1.3,
            f"log-log slope {slope:.2f} (times {', '.join(f'{t * 1e3:.0f}ms' for t in times)})")


# 11 --------------------------------------------------------------------------


@pytest.mark.slow
def test_11_optional_full_data():
    path = os.environ.get("STLF_ISONE_CSV")
    if not path:
        ACCEPTANCE_LINES.append("[SKIP] 11. optional full-data check: set STLF_ISONE_CSV to an ISO-NE CSV to run")
        pytest.skip("STLF_ISONE_CSV not set")
    from stlf.trainer import train_framework

    schema = dataio.iso_ne()
    series = dataio.prepare_series(path, schema, "2015-2017")
    split = dataio.make_splits(series, "2015-2017", "2018", "2019", seed=0)
    cfg = TrainConfig(batch_size=128, hidden=128, lam=0.001, cell="lstm")
    res = train_framework(split, cfg, skip_ec=True)
    from stlf.trainer import predict_set

    pred = split.test.to_mw(predict_set(res.forecaster, split.test))
    test_mape = mape(split.test.truth_mw(), pred)
    verdict(11, "optional full-data check", 1.5 <= test_mape <= 2.2, f"ISO-NE 2019 test MAPE {test_mape:.2f}%")
