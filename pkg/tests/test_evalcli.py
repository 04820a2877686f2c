import json
import struct

import numpy as np
import pytest

from conftest import tiny_model, tiny_series, tiny_windows
from stlf.errcorrect import param_checksum, transfer_init
from stlf.evalcli import (
    CheckpointError,
    MetricsError,
    load_checkpoint,
    mae,
    mape,
    metrics,
    relative_errors,
    save_checkpoint,
)
from stlf.evalcli.checkpoint import decode_checkpoint, encode_checkpoint
from stlf.evalcli.cli import main
from stlf.trainer import TrainConfig, fit


def brute(y, p):
    n = len(y)
    abs_sum, pct_sum, re = 0.0, 0.0, []
    for i in range(n):
        d = abs(y[i] - p[i])
        abs_sum += d
        pct_sum += d / abs(y[i])
        re.append(d / y[i] * 100.0)
    return abs_sum / n, pct_sum / n * 100.0, re


class TestMetrics:
    def test_identity(self):
        y = [5.0, 7.0]
        assert mae(y, y) == 0.0 and mape(y, y) == 0.0

    def test_worked_example(self):
        assert mae([100, 200], [110, 180]) == 15.0
        assert mape([100, 200], [110, 180]) == pytest.approx(10.0, abs=1e-12)

    def test_single_point(self):
        r = metrics([50.0], [49.0])
        assert r.mae == 1.0 and r.mape == pytest.approx(2.0) and r.re.tolist() == pytest.approx([2.0])

    def test_matches_brute_force(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n = int(rng.integers(1, 200))
            y = rng.uniform(10, 2000, n)
            p = y + rng.normal(0, 50, n)
            m, pct, re = brute(y.tolist(), p.tolist())
            r = metrics(y, p)
            assert abs(r.mae - m) < 1e-12 * max(1, m)
            assert abs(r.mape - pct) < 1e-12 * max(1, pct)
            np.testing.assert_allclose(r.re, re, atol=1e-12, rtol=0)

    def test_zero_truth(self):
        with pytest.raises(MetricsError) as info:
            mape([1.0, 0.0, 2.0], [1.0, 1.0, 1.0])
        assert info.value.indices == [1]
        r = metrics([1.0, 0.0], [1.0, 1.0])
        assert r.mae == 0.5 and r.mape is None and r.undefined_at == [1]
        with pytest.raises(MetricsError):
            relative_errors([0.0], [1.0])

    def test_length_mismatch(self):
        with pytest.raises(MetricsError):
            mae([1, 2], [1])
        with pytest.raises(MetricsError):
            mae([], [])


class TestCheckpoint:
    def model(self):
        m = tiny_model(seed=4)
        m.target_mean, m.target_std, m.trained = 512.5, 33.25, True
        return m

    def test_round_trip_is_bit_identical(self, tmp_path):
        m = self.model()
        path = save_checkpoint(m, tmp_path / "m.lfck")
        back = load_checkpoint(path).models["forecaster"]
        X = np.random.default_rng(0).normal(size=(3, 16, 5))
        h = np.random.default_rng(1).normal(size=(3, 12))
        assert (back.predict(X, h) == m.predict(X, h)).all()
        assert back.config == m.config
        assert (back.target_mean, back.target_std, back.trained) == (512.5, 33.25, True)
        assert param_checksum(back) == param_checksum(m)

    def test_byte_stable(self, tmp_path):
        m = self.model()
        a = save_checkpoint(m, tmp_path / "a.lfck").read_bytes()
        b = save_checkpoint(m, tmp_path / "b.lfck").read_bytes()
        assert a == b
        assert encode_checkpoint(m) == encode_checkpoint(m.copy())

    def test_manifest(self, tmp_path):
        save_checkpoint(self.model(), tmp_path / "m.lfck")
        man = json.loads((tmp_path / "m.lfck.manifest.json").read_text())
        names = [t["name"] for t in man["forecaster"]["tensors"]]
        assert "weighter.W" in names and all(len(t["sha256"]) == 64 for t in man["forecaster"]["tensors"])

    def test_truncated(self, tmp_path):
        data = encode_checkpoint(self.model())
        for cut in (3, 10, len(data) // 2, len(data) - 1):
            with pytest.raises(CheckpointError):
                decode_checkpoint(data[:cut])

    def test_bad_magic_and_version(self):
        data = bytearray(encode_checkpoint(self.model()))
        with pytest.raises(CheckpointError, match="magic"):
            decode_checkpoint(b"XXXX" + bytes(data[4:]))
        data[4:6] = struct.pack("<H", 99)
        with pytest.raises(CheckpointError, match="version 99"):
            decode_checkpoint(bytes(data))

    def test_corrupted_payload(self):
        data = bytearray(encode_checkpoint(self.model()))
        data[len(data) // 2] ^= 0xFF
        with pytest.raises(CheckpointError):
            decode_checkpoint(bytes(data))

    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / "none.lfck")

    def test_correction_keeps_frozen_weighter(self, tmp_path):
        f = self.model()
        g = transfer_init(f)
        save_checkpoint({"forecaster": f, "correction": g}, tmp_path / "fw.lfck")
        g2 = load_checkpoint(tmp_path / "fw.lfck").models["correction"]
        assert g2.frozen == {"weighter"}
        before = param_checksum(g2, "weighter")
        s = tiny_series()
        ws = tiny_windows(s)
        fit(g2, ws, ws, TrainConfig(epochs=1, batch_size=64, hidden=4, cell="gru"), lam=0.0)
        assert param_checksum(g2, "weighter") == before
        assert param_checksum(g2) != param_checksum(g)

    def test_stats_and_meta(self, tmp_path):
        from stlf.dataio import FeatureStats

        st = FeatureStats({"t": 1.5}, {"t": 2.0}, 100.0, 10.0)
        save_checkpoint(self.model(), tmp_path / "m.lfck", st, {"note": "x"})
        ck = load_checkpoint(tmp_path / "m.lfck")
        assert ck.stats == st and ck.meta == {"note": "x"}


CONFIG = """
run_dir = "run"
[data]
path = "synth.csv"
schema = "custom"
numeric = ["temperature", "noise"]
train = "2017-01-01..2017-02-01"
ec = "2017-02-01..2017-03-01"
test = "2017-03-01..2017-03-20"
train_stride = 24
[train]
epochs = 1
batch_size = 64
hidden = 4
cell = "gru"
fw_hidden = 4
att_hidden = 4
out_hidden = 4
"""


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.delenv("LF_RUN_DIR", raising=False)
    (tmp_path / "c.toml").write_text(CONFIG)
    assert main(["synth", "--out", str(tmp_path / "synth.csv"), "--days", "80", "--ar-coef", "0.9", "--ar-sigma", "5"]) == 0
    return tmp_path


class TestCli:
    def test_pipeline_composes(self, workdir, capsys):
        cfg = str(workdir / "c.toml")
        assert main(["prepare", "--config", cfg]) == 0
        assert main(["train", "--config", cfg, "--seed", "7"]) == 0
        first = (workdir / "run" / "forecaster.lfck").read_bytes()
        assert main(["train", "--config", cfg, "--seed", "7"]) == 0
        assert (workdir / "run" / "forecaster.lfck").read_bytes() == first
        assert main(["train-ec", "--config", cfg]) == 0
        assert main(["predict", "--config", cfg]) == 0
        lines = (workdir / "run" / "predictions.csv").read_text().splitlines()
        assert lines[0] == "timestamp,y_true,y_hat,y_bar"
        assert (len(lines) - 1) % 24 == 0 and len(lines) > 1
        capsys.readouterr()
        assert main(["evaluate", "--config", cfg, "--pred", str(workdir / "run" / "predictions.csv")]) == 0
        out = json.loads(capsys.readouterr().out)
        assert set(out) == {"mae", "mape", "n", "re_series_path"}
        assert out["n"] == len(lines) - 1
        assert main(["dump-weights", "--config", cfg]) == 0
        assert main(["dump-attention", "--config", cfg]) == 0
        att = (workdir / "run" / "attention.csv").read_text().splitlines()
        assert att[0] == "t,i,j,gamma_i,beta_ijt" and len(att) == 1 + 24 * 7 * 24

    def test_forecaster_only_predictions_have_no_y_bar(self, workdir):
        cfg = str(workdir / "c.toml")
        assert main(["train", "--config", cfg]) == 0
        assert main(["predict", "--config", cfg]) == 0
        assert (workdir / "run" / "predictions.csv").read_text().splitlines()[0] == "timestamp,y_true,y_hat"

    def test_evaluate_with_truth_file(self, tmp_path, capsys, monkeypatch):
        monkeypatch.delenv("LF_RUN_DIR", raising=False)
        (tmp_path / "p.csv").write_text("timestamp,y_hat\n2020-01-01T00:00:00,110\n2020-01-01T01:00:00,180\n")
        (tmp_path / "t.csv").write_text("timestamp,load_mw\n2020-01-01T01:00:00,200\n2020-01-01T00:00:00,100\n")
        rc = main(["evaluate", "--run-dir", str(tmp_path / "r"), "--pred", str(tmp_path / "p.csv"), "--truth", str(tmp_path / "t.csv")])
        assert rc == 0
        out = json.loads(capsys.readouterr().out)
        assert out["mae"] == 15.0 and out["mape"] == pytest.approx(10.0) and out["n"] == 2

    def test_run_dir_precedence(self, workdir, monkeypatch):
        cfg = str(workdir / "c.toml")
        monkeypatch.setenv("LF_RUN_DIR", str(workdir / "env"))
        assert main(["prepare", "--config", cfg]) == 0
        assert (workdir / "env" / "prepared.npz").exists()
        assert main(["prepare", "--config", cfg, "--run-dir", str(workdir / "flag")]) == 0
        assert (workdir / "flag" / "prepared.npz").exists()

    def test_usage_errors_exit_2(self, capsys):
        assert main(["frobnicate"]) == 2
        assert main(["train", "--bogus"]) == 2
        assert main([]) == 2

    def test_data_errors_exit_1(self, tmp_path, capsys, monkeypatch):
        monkeypatch.delenv("LF_RUN_DIR", raising=False)
        assert main(["train", "--config", str(tmp_path / "missing.toml")]) == 1
        (tmp_path / "bad.toml").write_text("[data]\npath = 'nope.csv'\ntrain='2017'\nec='2018'\ntest='2019'\n")
        assert main(["prepare", "--config", str(tmp_path / "bad.toml")]) == 1
        (tmp_path / "p.csv").write_text("timestamp,y_true,y_hat\nx,0,1\n")
        capsys.readouterr()
        # MAPE is undefined but MAE is still reported
        assert main(["evaluate", "--run-dir", str(tmp_path), "--pred", str(tmp_path / "p.csv")]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["mae"] == 1.0 and out["mape"] is None

    def test_bad_config_key_exit_1(self, workdir):
        (workdir / "c2.toml").write_text(CONFIG.replace("epochs = 1", "epochz = 1"))
        assert main(["train", "--config", str(workdir / "c2.toml")]) == 1
