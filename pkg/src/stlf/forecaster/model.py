"""Bidirectional recurrent encoder-decoder with hierarchical temporal attention."""

from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import numcore as nc
from ..featweight import FeatureWeighterParams, apply_weights, score_features
from ..numcore import ContractError, NumericalDivergenceError, Tensor
from .attention import TemporalAttentionParams, attention_scores, context_vector, similar_day_weights
from .cells import CELL_KINDS, RecurrentCellParams


@dataclass(frozen=True)
class ModelConfig:
    n_features: int
    hidden: int = 32
    cell: str = "lstm"
    days: int = 7
    day_len: int = 24
    fw_hidden: int = 32
    att_hidden: int = 32
    out_hidden: int = 32
    weighter_bias: bool = True

    def __post_init__(self):
        if self.cell not in CELL_KINDS:
            raise ContractError(f"cell must be one of {CELL_KINDS}, got {self.cell!r}")
        for name in ("n_features", "hidden", "days", "day_len", "fw_hidden", "att_hidden", "out_hidden"):
            if getattr(self, name) <= 0:
                raise ContractError(f"{name} must be positive")

    @property
    def history(self) -> int:
        return self.days * self.day_len

    @property
    def horizon(self) -> int:
        return self.day_len

    @property
    def window(self) -> int:
        return self.history + self.horizon

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class OutputHeadParams:
    W: Tensor  # (d_o, 2*hs)
    b: Tensor
    V: Tensor  # (1, d_o)
    b_V: Tensor  # (1,)

    @classmethod
    def init(cls, width: int, hidden: int, rng: np.random.Generator) -> "OutputHeadParams":
        b1, b2 = 1.0 / np.sqrt(width), 1.0 / np.sqrt(hidden)
        return cls(
            W=Tensor(rng.uniform(-b1, b1, (hidden, width)), requires_grad=True),
            b=Tensor(rng.uniform(-b1, b1, (hidden,)), requires_grad=True),
            V=Tensor(rng.uniform(-b2, b2, (1, hidden)), requires_grad=True),
            b_V=Tensor(rng.uniform(-b2, b2, (1,)), requires_grad=True),
        )

    def named(self) -> dict[str, Tensor]:
        return {"W": self.W, "b": self.b, "V": self.V, "b_V": self.b_V}


@dataclass
class EncoderState:
    forward: Tensor  # (B, T_h, hs)
    backward: Tensor  # (B, T_h, hs)
    hidden: Tensor  # (B, T_h, 2hs), [forward ; backward]
    c_forward: Tensor | None = None  # final LSTM cell state of each direction
    c_backward: Tensor | None = None


@dataclass
class DecoderState:
    hidden: Tensor  # (B, T_f, 2hs)
    contexts: list[Tensor]
    betas: list[Tensor]


def encode(x_weighted, target_hist, fwd: RecurrentCellParams, bwd: RecurrentCellParams) -> EncoderState:
    """Scan ``[x~_t ; y_t]`` forwards and backwards from zero states."""
    x_weighted = nc.as_tensor(x_weighted)
    B, T_h, _ = x_weighted.shape
    y = np.asarray(target_hist, dtype=np.float64).reshape(B, T_h, 1)
    inputs = nc.concat([x_weighted, y], axis=-1)
    zeros = np.zeros((B, fwd.hidden))
    Hf, cf = fwd.scan(inputs, zeros, zeros, where="encoder forward")
    Hb, cb = bwd.scan(inputs, zeros, zeros, reverse=True, where="encoder backward")
    return EncoderState(Hf, Hb, nc.concat([Hf, Hb], axis=-1), cf, cb)


def decode(
    x_weighted_f,
    x_raw_f,
    enc: EncoderState,
    gamma: np.ndarray,
    attn: TemporalAttentionParams,
    fwd: RecurrentCellParams,
    bwd: RecurrentCellParams,
    day_len: int,
) -> DecoderState:
    """Two-pass bidirectional decoding.

    Pass 1 advances the forward cell step by step; the attention query at
    step t is the encoder's last concatenated state for t = 0, afterwards the
    previous forward decoder state padded with the encoder backward final
    state (its t = 0 hidden). Pass 2 scans the backward cell over the fixed
    inputs ``[x~_t ; a_t]``.
    """
    x_weighted_f = nc.as_tensor(x_weighted_f)
    x_raw_f = np.asarray(x_raw_f, dtype=np.float64)
    B, T_f, _ = x_weighted_f.shape
    T_h = enc.hidden.shape[1]
    hs = fwd.hidden

    enc_b_final = enc.backward[:, 0, :]
    h = enc.forward[:, T_h - 1, :]
    c = enc.c_forward
    query_h = enc.hidden[:, T_h - 1, :]

    step_inputs, forward_states, contexts, betas = [], [], [], []
    for t in range(T_f):
        if t > 0:
            query_h = nc.concat([h, enc_b_final], axis=-1)
        beta = attention_scores(query_h, x_raw_f[:, t, :], attn)
        a = context_vector(gamma, beta, enc.hidden, day_len)
        inp = nc.concat([x_weighted_f[:, t, :], a], axis=-1)
        try:
            h, c = fwd.step(inp, h, c, where="decoder forward")
        except NumericalDivergenceError as exc:
            raise NumericalDivergenceError(t, "decoder forward") from exc
        step_inputs.append(inp)
        forward_states.append(h)
        contexts.append(a)
        betas.append(beta)

    Hb, _ = bwd.scan(
        nc.stack(step_inputs, axis=1), enc_b_final, enc.c_backward, reverse=True, where="decoder backward"
    )
    Hf = nc.stack(forward_states, axis=1)
    assert Hf.shape == (B, T_f, hs)
    return DecoderState(nc.concat([Hf, Hb], axis=-1), contexts, betas)


def output_head(hidden, params: OutputHeadParams) -> Tensor:
    """``V relu(W h + b) + b_V`` for each step; (..., 2hs) -> (...)."""
    hidden = nc.as_tensor(hidden)
    out = nc.linear(nc.relu(nc.linear(hidden, params.W, params.b)), params.V, params.b_V)
    return nc.reshape(out, hidden.shape[:-1])


@dataclass
class ForwardPass:
    y: Tensor  # standardized forecasts (B, T_f)
    alpha: Tensor  # (B, L, n)
    scores: Tensor  # (B, L, n)
    gamma: np.ndarray  # (B, M)
    betas: list[Tensor]
    encoder: EncoderState
    decoder: DecoderState


GROUPS = ("weighter", "enc_fwd", "enc_bwd", "dec_fwd", "dec_bwd", "attention", "head")


@dataclass
class ForecastModel:
    config: ModelConfig
    weighter: FeatureWeighterParams
    cells: dict[str, RecurrentCellParams]
    attention: TemporalAttentionParams
    head: OutputHeadParams
    target_mean: float = 0.0
    target_std: float = 1.0
    frozen: set[str] = field(default_factory=set)
    trained: bool = False

    @classmethod
    def init(cls, config: ModelConfig, seed: int = 0) -> "ForecastModel":
        """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation from a PCG64 stream."""
        rng = np.random.Generator(np.random.PCG64(seed))
        n, hs = config.n_features, config.hidden
        weighter = FeatureWeighterParams.init(n, config.fw_hidden, rng, bias=config.weighter_bias)
        cells = {
            "enc_fwd": RecurrentCellParams.init(config.cell, n + 1, hs, rng),
            "enc_bwd": RecurrentCellParams.init(config.cell, n + 1, hs, rng),
            "dec_fwd": RecurrentCellParams.init(config.cell, n + 2 * hs, hs, rng),
            "dec_bwd": RecurrentCellParams.init(config.cell, n + 2 * hs, hs, rng),
        }
        attention = TemporalAttentionParams.init(2 * hs + n, config.att_hidden, config.history, rng)
        head = OutputHeadParams.init(2 * hs, config.out_hidden, rng)
        return cls(config, weighter, cells, attention, head)

    def named_parameters(self) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        blocks = {"weighter": self.weighter, **self.cells, "attention": self.attention, "head": self.head}
        for group in GROUPS:
            for name, t in blocks[group].named().items():
                out[f"{group}.{name}"] = t
        return out

    def trainable_parameters(self) -> dict[str, Tensor]:
        return {k: v for k, v in self.named_parameters().items() if k.split(".")[0] not in self.frozen}

    def freeze(self, group: str) -> None:
        if group not in GROUPS:
            raise ContractError(f"unknown parameter group {group!r}")
        self.frozen.add(group)
        self._sync_requires_grad()

    def _sync_requires_grad(self) -> None:
        for name, t in self.named_parameters().items():
            t.requires_grad = name.split(".")[0] not in self.frozen
            if not t.requires_grad:
                t.grad = None

    def copy(self) -> "ForecastModel":
        clone = copy.deepcopy(self)
        clone._sync_requires_grad()
        return clone

    def zero_grad(self) -> None:
        for t in self.named_parameters().values():
            t.grad = None

    def forward(self, X, hist) -> ForwardPass:
        """Standardized forecasts for a batch; ``X`` (B, L, n), ``hist`` (B, T_h)."""
        cfg = self.config
        X = np.asarray(X, dtype=np.float64)
        hist = np.asarray(hist, dtype=np.float64)
        if X.ndim != 3 or X.shape[1:] != (cfg.window, cfg.n_features):
            raise ContractError(f"window batch must be (B, {cfg.window}, {cfg.n_features}), got {X.shape}")
        B = X.shape[0]
        if hist.shape != (B, cfg.history):
            raise ContractError(f"history batch must be ({B}, {cfg.history}), got {hist.shape}")
        T_h = cfg.history

        fs = score_features(X, self.weighter)
        x_tilde = apply_weights(X, fs.alpha)
        days = X[:, :T_h].reshape(B, cfg.days, cfg.day_len, cfg.n_features)
        gamma = similar_day_weights(days, X[:, T_h:]).gamma

        enc = encode(x_tilde[:, :T_h, :], hist, self.cells["enc_fwd"], self.cells["enc_bwd"])
        dec = decode(
            x_tilde[:, T_h:, :],
            X[:, T_h:, :],
            enc,
            gamma,
            self.attention,
            self.cells["dec_fwd"],
            self.cells["dec_bwd"],
            cfg.day_len,
        )
        y = output_head(dec.hidden, self.head)
        return ForwardPass(y, fs.alpha, fs.scores, gamma, dec.betas, enc, dec)

    def predict(self, X, hist) -> np.ndarray:
        """Standardized forecasts without recording a tape."""
        with nc.no_grad():
            return self.forward(X, hist).y.data.copy()

    def destandardize(self, y_std: np.ndarray) -> np.ndarray:
        return np.asarray(y_std) * self.target_std + self.target_mean


def forecast(sample, model: ForecastModel) -> np.ndarray:
    """De-standardized T_f-step forecast for one window sample."""
    X = np.asarray(sample.X)[None]
    hist = np.asarray(sample.y_h)[None]
    return model.destandardize(model.predict(X, hist)[0])
