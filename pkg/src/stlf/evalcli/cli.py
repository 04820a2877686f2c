"""``stlf`` command line.

Every subcommand reads a TOML config (``--config``) and writes under a run
directory chosen by ``--run-dir``, else ``$LF_RUN_DIR``, else the config's
``run_dir``, else ``./runs/default``. Relative paths inside the config are
resolved against the config file's directory.

Exit status: 0 on success, 2 on usage errors, 1 on data or config errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import dataio
from ..dataio import ConfigError, DataError, SchemaError
from ..errcorrect import UsageError, compute_residuals, corrected_forecasts, train_correction, transfer_init
from ..featweight import weight_trace, write_weight_trace
from ..forecaster import ForecastModel
from ..numcore import ContractError
from ..trainer import GridSpec, TrainConfig, TrainingDivergence, grid_search, predict_set, train_forecaster
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .metrics import MetricsError, metrics

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("stlf")

CACHE = "prepared.npz"
FORECASTER_CKPT = "forecaster.lfck"
FRAMEWORK_CKPT = "framework.lfck"
EXPECTED_ERRORS = (
    ConfigError,
    DataError,
    SchemaError,
    CheckpointError,
    MetricsError,
    UsageError,
    ContractError,
    TrainingDivergence,
    tomllib.TOMLDecodeError,
    OSError,
)


@dataclass
class RunConfig:
    base: Path
    run_dir: Path
    data: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)

    def path(self, value) -> Path:
        p = Path(value)
        return p if p.is_absolute() else self.base / p

    def schema(self):
        d = self.data
        return dataio.get_schema(d.get("schema", "custom"), d.get("numeric"), d.get("calendar"))

    def train_config(self, **overrides) -> TrainConfig:
        return TrainConfig.from_dict({**self.train, **{k: v for k, v in overrides.items() if v is not None}})

    def ranges(self) -> tuple[str, str, str]:
        try:
            return str(self.data["train"]), str(self.data["ec"]), str(self.data["test"])
        except KeyError as exc:
            raise ConfigError(f"config [data] is missing the {exc.args[0]!r} range") from None


def load_config(args) -> RunConfig:
    raw: dict = {}
    base = Path.cwd()
    if getattr(args, "config", None):
        cfg_path = Path(args.config)
        if not cfg_path.exists():
            raise ConfigError(f"{cfg_path}: no such config file")
        with open(cfg_path, "rb") as fh:
            raw = tomllib.load(fh)
        base = cfg_path.resolve().parent
    unknown = set(raw) - {"run_dir", "data", "train", "grid"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    if getattr(args, "run_dir", None):
        run_dir = Path(args.run_dir)
    elif os.environ.get("LF_RUN_DIR"):
        run_dir = Path(os.environ["LF_RUN_DIR"])
    elif "run_dir" in raw:
        run_dir = Path(raw["run_dir"])
        run_dir = run_dir if run_dir.is_absolute() else base / run_dir
    else:
        run_dir = Path("runs") / "default"
    return RunConfig(base, run_dir, dict(raw.get("data", {})), dict(raw.get("train", {})), dict(raw.get("grid", {})))


# data preparation ----------------------------------------------------------


def _embed(rc: RunConfig, data_path: Path, stats=None):
    schema = rc.schema()
    raw = dataio.interpolate_missing(dataio.load_csv(data_path, schema))
    if stats is None:
        lo, hi = dataio.parse_range(rc.ranges()[0]).rows(raw.timestamps)
        stats = dataio.fit_stats(raw, schema, slice(lo, hi))
    return dataio.embed_features(raw, schema, stats, rc.data.get("holidays", ())), schema


def _split(rc: RunConfig, series):
    train, ec, test = rc.ranges()
    return dataio.make_splits(
        series,
        train,
        ec,
        test,
        seed=int(rc.data.get("seed", 0)),
        train_stride=int(rc.data.get("train_stride", 1)),
    )


def _data_path(rc: RunConfig, override=None) -> Path:
    if override:
        return Path(override)
    if "path" not in rc.data:
        raise ConfigError("no data file: set [data] path or pass --data")
    return rc.path(rc.data["path"])


def _write_cache(path: Path, series, schema) -> None:
    np.savez(
        path,
        timestamps=series.timestamps.astype("datetime64[s]").astype(np.int64),
        features=series.features,
        target=series.target,
        stats=np.array(json.dumps(series.stats.to_dict(), sort_keys=True)),
        schema=np.array(json.dumps(schema.to_dict(), sort_keys=True)),
    )


def _read_cache(path: Path):
    with np.load(path, allow_pickle=False) as z:
        stats = dataio.FeatureStats.from_dict(json.loads(str(z["stats"])))
        schema = dataio.FeatureSchema.from_dict(json.loads(str(z["schema"])))
        series = dataio.EmbeddedSeries(
            timestamps=z["timestamps"].astype("datetime64[s]"),
            features=z["features"],
            target=z["target"],
            stats=stats,
            columns=schema.column_names(),
        )
    return series, schema


def _series(rc: RunConfig, data=None):
    """Embedded series from the prepare cache, or straight from the CSV."""
    cache = rc.run_dir / CACHE
    if data is None and cache.exists():
        return _read_cache(cache)
    return _embed(rc, _data_path(rc, data))


def _model_meta(rc: RunConfig, schema, train_cfg: TrainConfig | None) -> dict:
    return {"schema": schema.to_dict(), "train": None if train_cfg is None else train_cfg.to_dict()}


# subcommands ---------------------------------------------------------------


def cmd_synth(args) -> int:
    cfg = dataio.SynthConfig(
        days=args.days, start=args.start, seed=args.seed, ar_coef=args.ar_coef, ar_sigma=args.ar_sigma
    )
    path = dataio.write_synthetic(args.out, cfg)
    print(path)
    return 0


def cmd_prepare(args) -> int:
    rc = load_config(args)
    series, schema = _embed(rc, _data_path(rc, args.data))
    split = _split(rc, series)
    rc.run_dir.mkdir(parents=True, exist_ok=True)
    _write_cache(rc.run_dir / CACHE, series, schema)
    (rc.run_dir / "stats.json").write_text(json.dumps(series.stats.to_dict(), indent=2, sort_keys=True) + "\n")
    counts = {
        "rows": len(series),
        "features": int(series.features.shape[1]),
        "train": len(split.train),
        "ec_train": len(split.ec_train),
        "validation": len(split.validation),
        "test": len(split.test),
    }
    (rc.run_dir / "windows.json").write_text(json.dumps(counts, indent=2) + "\n")
    print(json.dumps(counts))
    return 0


def cmd_train(args) -> int:
    rc = load_config(args)
    cfg = rc.train_config(seed=args.seed, epochs=args.epochs)
    series, schema = _series(rc, args.data)
    split = _split(rc, series)
    rc.run_dir.mkdir(parents=True, exist_ok=True)
    model = ForecastModel.init(cfg.model_for(split.train), seed=cfg.seed)
    model, hist = train_forecaster(model, split.train, split.validation, cfg, log_path=rc.run_dir / "train_log.csv")
    save_checkpoint(model, rc.run_dir / FORECASTER_CKPT, series.stats, _model_meta(rc, schema, cfg))
    print(json.dumps({"best_epoch": hist.best_epoch, "val_mae": hist.best_val_mae, "epochs": len(hist.records)}))
    return 0


def cmd_train_ec(args) -> int:
    rc = load_config(args)
    cfg = rc.train_config(seed=args.seed, epochs=args.epochs)
    ckpt = load_checkpoint(Path(args.checkpoint) if args.checkpoint else rc.run_dir / FORECASTER_CKPT)
    forecaster = ckpt.models["forecaster"]
    series, schema = _series(rc, args.data) if args.data is None else (_embed(rc, Path(args.data), ckpt.stats))
    split = _split(rc, series)
    errors = compute_residuals(forecaster, split.ec_pool)
    pos = {int(s): k for k, s in enumerate(errors.windows.starts)}
    tr = [pos[int(s)] for s in split.ec_train.starts if int(s) in pos]
    va = [pos[int(s)] for s in split.validation.starts if int(s) in pos]
    correction = transfer_init(forecaster)
    correction, hist = train_correction(
        correction, errors.subset(tr), errors.subset(va), cfg, log_path=rc.run_dir / "ec_log.csv"
    )
    save_checkpoint(
        {"forecaster": forecaster, "correction": correction},
        rc.run_dir / FRAMEWORK_CKPT,
        ckpt.stats,
        _model_meta(rc, schema, cfg),
    )
    print(json.dumps({"best_epoch": hist.best_epoch, "val_mae": hist.best_val_mae, "epochs": len(hist.records)}))
    return 0


def cmd_gridsearch(args) -> int:
    rc = load_config(args)
    if not rc.grid:
        raise ConfigError("config has no [grid] section")
    spec = GridSpec({k: list(v) if isinstance(v, list) else [v] for k, v in rc.grid.items()})
    base = rc.train_config(seed=args.seed, epochs=args.epochs)
    series, schema = _series(rc, args.data)
    split = _split(rc, series)
    rc.run_dir.mkdir(parents=True, exist_ok=True)

    def report(run):
        msg = f"val_mae={run.val_mae:.4f}" if run.error is None else run.error
        log.info("grid %s: %s", run.params, msg)

    result = grid_search(spec, split, base, on_run=report)
    result.write_csv(rc.run_dir / "grid_results.csv")
    if result.best is None:
        raise ConfigError("every grid combination failed; see grid_results.csv")
    best_cfg = base.with_(**result.best.params)
    save_checkpoint(result.best.model, rc.run_dir / FORECASTER_CKPT, series.stats, _model_meta(rc, schema, best_cfg))
    print(json.dumps({"best": result.best.params, "val_mae": result.best.val_mae, "runs": len(result.runs)}))
    return 0


def _load_for_predict(rc: RunConfig, path_arg):
    if path_arg:
        return load_checkpoint(Path(path_arg))
    for name in (FRAMEWORK_CKPT, FORECASTER_CKPT):
        if (rc.run_dir / name).exists():
            return load_checkpoint(rc.run_dir / name)
    raise CheckpointError(f"no checkpoint in {rc.run_dir}; run train first or pass --checkpoint")


def _test_series(rc: RunConfig, ckpt, data_arg):
    """Series embedded with the checkpoint's stored statistics."""
    if data_arg is None and (rc.run_dir / CACHE).exists():
        return _read_cache(rc.run_dir / CACHE)[0]
    if ckpt.stats is None:
        raise CheckpointError("checkpoint carries no standardization statistics")
    return _embed(rc, _data_path(rc, data_arg), ckpt.stats)[0]


def _fmt_ts(ts) -> str:
    return str(np.datetime_as_string(np.datetime64(ts, "s"), unit="s"))


def cmd_predict(args) -> int:
    rc = load_config(args)
    ckpt = _load_for_predict(rc, args.checkpoint)
    forecaster = ckpt.models["forecaster"]
    correction = ckpt.models.get("correction")
    series = _test_series(rc, ckpt, args.data)
    split = _split(rc, series)
    windows = split.test
    if len(windows) == 0:
        raise DataError("no test windows in the configured test range")

    if correction is not None:
        errors = compute_residuals(forecaster, windows)
        windows = errors.windows
        y_hat, y_bar = corrected_forecasts(forecaster, correction, errors)
    else:
        y_hat, y_bar = windows.to_mw(predict_set(forecaster, windows)), None
    y_true = windows.truth_mw()

    out = Path(args.out) if args.out else rc.run_dir / "predictions.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "y_true", "y_hat"] + (["y_bar"] if y_bar is not None else []))
        for k in range(len(windows)):
            stamps = windows.future_timestamps(k)
            for t in range(windows.horizon):
                row = [_fmt_ts(stamps[t]), repr(float(y_true[k, t])), repr(float(y_hat[k, t]))]
                if y_bar is not None:
                    row.append(repr(float(y_bar[k, t])))
                w.writerow(row)
    print(out)
    return 0


def _read_columns(path: Path) -> dict[str, list[str]]:
    if not path.exists():
        raise DataError(f"{path}: no such file")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError(f"{path}: empty file")
        cols: dict[str, list[str]] = {k: [] for k in reader.fieldnames}
        for row in reader:
            for k in cols:
                cols[k].append(row[k])
    return cols


def _floats(values, name: str, path: Path) -> np.ndarray:
    try:
        return np.array([float(v) for v in values])
    except ValueError:
        raise DataError(f"{path}: non-numeric value in column {name!r}") from None


def cmd_evaluate(args) -> int:
    rc = load_config(args)
    pred_path = Path(args.pred)
    pred = _read_columns(pred_path)
    column = args.column or ("y_bar" if "y_bar" in pred else "y_hat")
    if column not in pred:
        raise DataError(f"{pred_path}: no column {column!r}")
    y_hat = _floats(pred[column], column, pred_path)
    stamps = pred.get("timestamp")

    if args.truth:
        truth_path = Path(args.truth)
        truth = _read_columns(truth_path)
        tcol = next((c for c in ("y_true", "load_mw") if c in truth), None)
        if tcol is None:
            raise DataError(f"{truth_path}: needs a y_true or load_mw column")
        values = _floats(truth[tcol], tcol, truth_path)
        if stamps is not None and "timestamp" in truth:
            lookup = dict(zip(truth["timestamp"], values))
            missing = [s for s in stamps if s not in lookup]
            if missing:
                raise DataError(f"{truth_path}: no truth for timestamp {missing[0]}")
            y_true = np.array([lookup[s] for s in stamps])
        else:
            y_true = values
    elif "y_true" in pred:
        y_true = _floats(pred["y_true"], "y_true", pred_path)
    else:
        raise DataError("no ground truth: pass --truth or include y_true in the prediction file")

    report = metrics(y_true, y_hat)
    rc.run_dir.mkdir(parents=True, exist_ok=True)
    re_path = rc.run_dir / "re_series.csv"
    if report.re is not None:
        with open(re_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["timestamp", "re"])
            for k, v in enumerate(report.re):
                w.writerow([stamps[k] if stamps else k, repr(float(v))])
    else:
        log.warning("MAPE undefined: y == 0 at indices %s", report.undefined_at[:10])
    out = {
        "mae": report.mae,
        "mape": report.mape,
        "n": report.n,
        "re_series_path": str(re_path) if report.re is not None else None,
    }
    (rc.run_dir / "metrics.json").write_text(json.dumps(out, indent=2) + "\n")
    print(json.dumps(out))
    return 0


def _window(rc: RunConfig, args):
    ckpt = _load_for_predict(rc, args.checkpoint)
    model = ckpt.models["forecaster"]
    series = _test_series(rc, ckpt, args.data)
    windows = _split(rc, series).test
    if not 0 <= args.window < len(windows):
        raise ConfigError(f"--window must be in [0, {len(windows)}), got {args.window}")
    return model, series, windows, args.window


def cmd_dump_weights(args) -> int:
    rc = load_config(args)
    model, series, windows, k = _window(rc, args)
    trace = weight_trace(windows[k].X, model.weighter)
    rc.run_dir.mkdir(parents=True, exist_ok=True)
    out = Path(args.out) if args.out else rc.run_dir / "feature_weights.csv"
    write_weight_trace(out, trace, series.columns or None)
    print(out)
    return 0


def cmd_dump_attention(args) -> int:
    rc = load_config(args)
    model, _, windows, k = _window(rc, args)
    X, hist, _ = windows.batch([k])
    from .. import numcore as nc

    cfg = model.config
    with nc.no_grad():
        fp = model.forward(X, hist)
    gamma = fp.gamma[0]
    rc.run_dir.mkdir(parents=True, exist_ok=True)
    out = Path(args.out) if args.out else rc.run_dir / "attention.csv"
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "i", "j", "gamma_i", "beta_ijt"])
        for t, beta in enumerate(fp.betas):
            b = beta.data[0]
            for i in range(cfg.days):
                for j in range(cfg.day_len):
                    w.writerow([t, i, j, repr(float(gamma[i])), repr(float(b[i * cfg.day_len + j]))])
    print(out)
    return 0


# argument parsing ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stlf", description="Day-ahead load forecasting with error correction.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def common(sp, data=True):
        sp.add_argument("--config", help="TOML config file")
        sp.add_argument("--run-dir", help="output directory (overrides LF_RUN_DIR and the config)")
        if data:
            sp.add_argument("--data", help="input CSV (overrides [data] path)")

    s = sub.add_parser("synth", help="write the seeded synthetic dataset")
    s.add_argument("--out", required=True)
    s.add_argument("--days", type=int, default=dataio.SynthConfig.days)
    s.add_argument("--start", default=dataio.SynthConfig.start)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--ar-coef", type=float, default=0.0)
    s.add_argument("--ar-sigma", type=float, default=0.0)
    s.set_defaults(fn=cmd_synth)

    s = sub.add_parser("prepare", help="embed a CSV and cache it with its statistics")
    common(s)
    s.set_defaults(fn=cmd_prepare)

    for name, fn, helptext in (
        ("train", cmd_train, "train the forecaster"),
        ("train-ec", cmd_train_ec, "train the error-correction model"),
        ("gridsearch", cmd_gridsearch, "grid search over [grid] axes"),
    ):
        s = sub.add_parser(name, help=helptext)
        common(s)
        s.add_argument("--seed", type=int)
        s.add_argument("--epochs", type=int)
        if name == "train-ec":
            s.add_argument("--checkpoint", help="forecaster checkpoint (default: run dir)")
        s.set_defaults(fn=fn)

    s = sub.add_parser("predict", help="forecast every test window")
    common(s)
    s.add_argument("--checkpoint")
    s.add_argument("--out")
    s.set_defaults(fn=cmd_predict)

    s = sub.add_parser("evaluate", help="MAE/MAPE/RE of a prediction file")
    common(s, data=False)
    s.add_argument("--pred", required=True)
    s.add_argument("--truth")
    s.add_argument("--column", help="prediction column (default y_bar if present, else y_hat)")
    s.set_defaults(fn=cmd_evaluate)

    for name, fn in (("dump-weights", cmd_dump_weights), ("dump-attention", cmd_dump_attention)):
        s = sub.add_parser(name, help=f"write {name.split('-')[1]} for one test window")
        common(s)
        s.add_argument("--checkpoint")
        s.add_argument("--window", type=int, default=0)
        s.add_argument("--out")
        s.set_defaults(fn=fn)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.fn(args)
    except EXPECTED_ERRORS as exc:
        print(f"stlf {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
