"""Training hyper-parameters."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace

from ..dataio.splits import ConfigError
from ..forecaster import ModelConfig

L1_MODES = ("alpha", "scores")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 300  # N_l
    ec_epochs: int | None = None  # N_e; None reuses epochs
    batch_size: int = 128
    hidden: int = 128
    lam: float = 0.001
    l1_mode: str = "alpha"
    cell: str = "lstm"
    seed: int = 0
    patience: int = 30
    lr: float = 0.001
    lr_factor: float = 0.1
    lr_period: int = 30
    clip: float | None = 5.0  # None or 0 disables clipping
    fw_hidden: int = 32
    att_hidden: int = 32
    out_hidden: int = 32
    weighter_bias: bool = True

    def __post_init__(self):
        for name in ("epochs", "batch_size", "hidden", "patience", "lr_period", "fw_hidden", "att_hidden", "out_hidden"):
            if int(getattr(self, name)) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.ec_epochs is not None and self.ec_epochs <= 0:
            raise ConfigError("ec_epochs must be positive")
        if self.lam < 0:
            raise ConfigError(f"lam must be non-negative, got {self.lam}")
        if not self.lr > 0:
            raise ConfigError("lr must be positive")
        if self.l1_mode not in L1_MODES:
            raise ConfigError(f"l1_mode must be one of {L1_MODES}")
        if self.clip is not None and self.clip < 0:
            raise ConfigError("clip must be non-negative")

    @property
    def max_norm(self) -> float | None:
        return self.clip if self.clip else None

    def model_config(self, n_features: int, days: int = 7, day_len: int = 24) -> ModelConfig:
        return ModelConfig(
            n_features=n_features,
            hidden=self.hidden,
            cell=self.cell,
            days=days,
            day_len=day_len,
            fw_hidden=self.fw_hidden,
            att_hidden=self.att_hidden,
            out_hidden=self.out_hidden,
            weighter_bias=self.weighter_bias,
        )

    def model_for(self, windows) -> ModelConfig:
        """Model geometry matching a window set: ``day_len = T_f``, ``days = T_h / T_f``."""
        if windows.history % windows.horizon:
            raise ConfigError(f"history {windows.history} is not a whole number of {windows.horizon}-step days")
        n = windows.series.features.shape[1]
        return self.model_config(n, days=windows.history // windows.horizon, day_len=windows.horizon)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown training keys: {sorted(unknown)}")
        return cls(**d)

    def with_(self, **kw) -> "TrainConfig":
        return replace(self, **kw)
