"""Hierarchical temporal attention: similar-day weights times hour-level scores."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import numcore as nc
from ..numcore import ContractError, Tensor

DISTANCE_EPS = 1e-8


@dataclass
class SimilarDayWeights:
    gamma: np.ndarray  # (..., M)
    distance: np.ndarray  # (..., M)


def similar_day_weights(days, future) -> SimilarDayWeights:
    """Softmax of reciprocal day distances.

    ``days`` is (..., M, t_d, n) and ``future`` is (..., t_d, n). The distance of
    day i is the sum over features k of the Euclidean norm of the difference
    between the two t_d-long columns. No gradient flows through gamma.
    """
    days = np.asarray(days, dtype=np.float64)
    future = np.asarray(future, dtype=np.float64)
    if days.shape[-2:] != future.shape[-2:]:
        raise ContractError(f"day block {days.shape[-2:]} does not match future block {future.shape[-2:]}")
    diff = days - future[..., None, :, :]
    distance = np.sqrt((diff * diff).sum(axis=-2)).sum(axis=-1)
    gamma = nc.softmax_array(1.0 / (distance + DISTANCE_EPS), axis=-1)
    return SimilarDayWeights(gamma=gamma, distance=distance)


@dataclass
class TemporalAttentionParams:
    W: Tensor  # (d_att, 2*hs + n)
    b: Tensor  # (d_att,)
    V: Tensor  # (T_h, d_att)
    b_V: Tensor  # (T_h,)

    @property
    def history(self) -> int:
        return self.V.shape[0]

    @classmethod
    def init(cls, query_width: int, hidden: int, history: int, rng: np.random.Generator) -> "TemporalAttentionParams":
        b1 = 1.0 / np.sqrt(query_width)
        b2 = 1.0 / np.sqrt(hidden)
        return cls(
            W=Tensor(rng.uniform(-b1, b1, (hidden, query_width)), requires_grad=True),
            b=Tensor(rng.uniform(-b1, b1, (hidden,)), requires_grad=True),
            V=Tensor(rng.uniform(-b2, b2, (history, hidden)), requires_grad=True),
            b_V=Tensor(rng.uniform(-b2, b2, (history,)), requires_grad=True),
        )

    def named(self) -> dict[str, Tensor]:
        return {"W": self.W, "b": self.b, "V": self.V, "b_V": self.b_V}


def attention_scores(h_prev, x_t, params: TemporalAttentionParams) -> Tensor:
    """Attention weights beta over all T_h history positions, shape (B, T_h).

    The query is ``[h_prev ; x_t]``. Flat position ``p = i*t_d + j`` (0-based
    day i, hour j) is simply the encoder time index.
    """
    query = nc.concat([h_prev, x_t], axis=-1)
    if query.shape[-1] != params.W.shape[1]:
        raise ContractError(f"attention query width {query.shape[-1]} != {params.W.shape[1]}")
    d = nc.linear(nc.tanh(nc.linear(query, params.W, params.b)), params.V, params.b_V)
    return nc.softmax(d, axis=-1)


def context_vector(gamma: np.ndarray, beta, hidden, day_len: int) -> Tensor:
    """``a_t = sum_i sum_j gamma_i beta_ij h_ij``.

    ``gamma`` (B, M), ``beta`` (B, T_h), ``hidden`` (B, T_h, D) -> (B, D).
    """
    beta, hidden = nc.as_tensor(beta), nc.as_tensor(hidden)
    B, T_h = beta.shape
    if gamma.shape[-1] * day_len != T_h:
        raise ContractError(f"{gamma.shape[-1]} days of {day_len} steps do not cover {T_h} positions")
    weights = nc.mul(beta, np.repeat(gamma, day_len, axis=-1))
    a = nc.matmul(nc.reshape(weights, (B, 1, T_h)), hidden)
    return nc.reshape(a, (B, hidden.shape[-1]))
