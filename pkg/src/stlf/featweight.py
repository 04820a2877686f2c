"""Time-varying feature-weighting attention.

For every time step the row ``x_t`` is scored by a two-layer map
``h_t = V tanh(W x_t + b_W) + b_V``, normalised with a softmax into ``alpha_t``
and applied element-wise: ``x~_t = alpha_t * x_t``. One weighter instance is
shared by all historical and future rows of a window.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import numcore as nc
from .numcore import ContractError, Tensor


@dataclass
class FeatureWeighterParams:
    W: Tensor  # (d_fw, n)
    V: Tensor  # (n, d_fw)
    b_W: Tensor | None = None  # (d_fw,)
    b_V: Tensor | None = None  # (n,)

    @property
    def n(self) -> int:
        return self.W.shape[1]

    @property
    def hidden(self) -> int:
        return self.W.shape[0]

    @classmethod
    def init(cls, n: int, hidden: int, rng: np.random.Generator, bias: bool = True) -> "FeatureWeighterParams":
        def u(shape, fan_in):
            bound = 1.0 / np.sqrt(fan_in)
            return Tensor(rng.uniform(-bound, bound, shape), requires_grad=True)

        return cls(
            W=u((hidden, n), n),
            V=u((n, hidden), hidden),
            b_W=u((hidden,), n) if bias else None,
            b_V=u((n,), hidden) if bias else None,
        )

    def named(self) -> dict[str, Tensor]:
        out = {"W": self.W, "V": self.V}
        if self.b_W is not None:
            out["b_W"] = self.b_W
        if self.b_V is not None:
            out["b_V"] = self.b_V
        return out


@dataclass
class FeatureScores:
    scores: Tensor  # pre-softmax h_t, (..., n)
    alpha: Tensor  # softmax weights, (..., n)


def score_features(x, params: FeatureWeighterParams) -> FeatureScores:
    """Score and normalise feature rows; ``x`` has shape (..., n)."""
    x = nc.as_tensor(x)
    if x.shape[-1] != params.n:
        raise ContractError(f"feature row has width {x.shape[-1]}, weighter expects {params.n}")
    hidden = nc.tanh(nc.linear(x, params.W, params.b_W))
    scores = nc.linear(hidden, params.V, params.b_V)
    return FeatureScores(scores=scores, alpha=nc.softmax(scores, axis=-1))


def apply_weights(x, alpha) -> Tensor:
    x, alpha = nc.as_tensor(x), nc.as_tensor(alpha)
    if x.shape != alpha.shape:
        raise ContractError(f"weights shape {alpha.shape} does not match features {x.shape}")
    return nc.mul(alpha, x)


def weight_trace(X: np.ndarray, params: FeatureWeighterParams) -> np.ndarray:
    """The (T, n) matrix whose row t is alpha_t for window ``X``."""
    with nc.no_grad():
        return score_features(np.asarray(X, dtype=np.float64), params).alpha.data.copy()


def write_weight_trace(path: str | Path, trace: np.ndarray, names=None) -> None:
    trace = np.atleast_2d(trace)
    if names is None:
        names = [f"feature_{k + 1}" for k in range(trace.shape[1])]
    elif len(names) != trace.shape[1]:
        raise ContractError(f"{len(names)} column names for {trace.shape[1]} features")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + list(names))
        for t, row in enumerate(trace):
            w.writerow([t] + [repr(float(v)) for v in row])
