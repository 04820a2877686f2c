"""Binary checkpoints for one or more named models.

Layout (little-endian)::

    b"LFCK" | u16 version | u32 len | header JSON
    per model: u32 len | model JSON | u32 count | records
    record:    u16 len | name | u8 ndim | u32 dims... | u8 trainable | f8 data
    32-byte SHA-256 of everything before it

JSON is written with sorted keys, so a fixed model always serialises to
the same bytes. A ``.manifest.json`` next to the file lists every tensor
with its shape and checksum.
"""

from __future__ import annotations

import hashlib
import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..dataio.embedding import FeatureStats
from ..forecaster import ForecastModel, ModelConfig

MAGIC = b"LFCK"
VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    models: dict[str, ForecastModel]
    stats: FeatureStats | None = None
    meta: dict = field(default_factory=dict)


def _json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False).encode("utf-8")


def _model_header(model: ForecastModel) -> dict:
    return {
        "config": model.config.to_dict(),
        "frozen": sorted(model.frozen),
        "target_mean": model.target_mean,
        "target_std": model.target_std,
        "trained": model.trained,
    }


def encode_checkpoint(models, stats: FeatureStats | None = None, meta: dict | None = None) -> bytes:
    if isinstance(models, ForecastModel):
        models = {"forecaster": models}
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<H", VERSION))
    header = {"models": list(models), "stats": None if stats is None else stats.to_dict(), "meta": meta or {}}
    blob = _json(header)
    buf.write(struct.pack("<I", len(blob)) + blob)
    for name in models:
        model = models[name]
        blob = _json(_model_header(model))
        buf.write(struct.pack("<I", len(blob)) + blob)
        params = model.named_parameters()
        buf.write(struct.pack("<I", len(params)))
        for pname, t in params.items():
            raw = pname.encode("utf-8")
            buf.write(struct.pack("<H", len(raw)) + raw)
            buf.write(struct.pack("<B", t.data.ndim))
            buf.write(struct.pack(f"<{t.data.ndim}I", *t.data.shape))
            buf.write(struct.pack("<B", 1 if t.requires_grad else 0))
            buf.write(np.ascontiguousarray(t.data, dtype="<f8").tobytes())
    body = buf.getvalue()
    return body + hashlib.sha256(body).digest()


class _Reader:
    def __init__(self, data: bytes):
        self.data, self.pos = data, 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError("checkpoint is truncated")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def json(self):
        (n,) = self.unpack("<I")
        try:
            return json.loads(self.take(n).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"corrupt checkpoint header: {exc}") from None


def decode_checkpoint(data: bytes) -> Checkpoint:
    if len(data) < 4 or data[:4] != MAGIC:
        raise CheckpointError("not a checkpoint (bad magic bytes)")
    if len(data) < 6 + 32:
        raise CheckpointError("checkpoint is truncated")
    r = _Reader(data[:-32])
    r.take(4)
    (version,) = r.unpack("<H")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {VERSION})")
    if hashlib.sha256(data[:-32]).digest() != data[-32:]:
        raise CheckpointError("checkpoint checksum mismatch (truncated or corrupted file)")
    header = r.json()
    models = {}
    for name in header["models"]:
        mh = r.json()
        model = ForecastModel.init(ModelConfig(**mh["config"]), seed=0)
        params = model.named_parameters()
        (count,) = r.unpack("<I")
        if count != len(params):
            raise CheckpointError(f"model {name!r}: {count} tensors stored, {len(params)} expected")
        for _ in range(count):
            (n,) = r.unpack("<H")
            pname = r.take(n).decode("utf-8")
            (ndim,) = r.unpack("<B")
            shape = r.unpack(f"<{ndim}I")
            r.unpack("<B")  # trainable flag, re-derived from the frozen set below
            if pname not in params or params[pname].data.shape != tuple(shape):
                raise CheckpointError(f"model {name!r}: unexpected tensor {pname!r} with shape {tuple(shape)}")
            values = np.frombuffer(r.take(8 * int(np.prod(shape))), dtype="<f8").reshape(shape)
            params[pname].data[...] = values
        model.frozen = set(mh["frozen"])
        model._sync_requires_grad()
        model.target_mean, model.target_std = float(mh["target_mean"]), float(mh["target_std"])
        model.trained = bool(mh["trained"])
        models[name] = model
    if r.pos != len(r.data):
        raise CheckpointError("trailing bytes after checkpoint payload")
    stats = None if header["stats"] is None else FeatureStats.from_dict(header["stats"])
    return Checkpoint(models, stats, header["meta"])


def manifest(models) -> dict:
    if isinstance(models, ForecastModel):
        models = {"forecaster": models}
    out = {}
    for name, model in models.items():
        out[name] = {
            "frozen": sorted(model.frozen),
            "tensors": [
                {
                    "name": pname,
                    "shape": list(t.data.shape),
                    "trainable": bool(t.requires_grad),
                    "sha256": hashlib.sha256(np.ascontiguousarray(t.data, dtype="<f8").tobytes()).hexdigest(),
                }
                for pname, t in model.named_parameters().items()
            ],
        }
    return out


def save_checkpoint(models, path, stats: FeatureStats | None = None, meta: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = encode_checkpoint(models, stats, meta)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(data)
    tmp.replace(path)
    man = path.with_name(path.name + ".manifest.json")
    man.write_text(json.dumps(manifest(models), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"{path}: no such checkpoint")
    return decode_checkpoint(path.read_bytes())
