from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import numcore as nc
from ..numcore import ContractError, Tensor

CELL_KINDS = tuple(nc.GATES)


@dataclass
class RecurrentCellParams:
    """Weights of one recurrent direction; gate blocks stacked along axis 0."""

    kind: str
    W_x: Tensor  # (gates*hs, in)
    W_h: Tensor  # (gates*hs, hs)
    b_x: Tensor  # (gates*hs,)
    b_h: Tensor  # (gates*hs,)

    def __post_init__(self):
        if self.kind not in nc.GATES:
            raise ContractError(f"cell kind must be one of {CELL_KINDS}, got {self.kind!r}")
        G = nc.GATES[self.kind] * self.hidden
        if self.W_x.shape[0] != G or self.W_h.shape != (G, self.hidden):
            raise ContractError(f"{self.kind} cell weights inconsistent with {nc.GATES[self.kind]} gates")

    @property
    def hidden(self) -> int:
        return self.W_h.shape[1]

    @property
    def input_width(self) -> int:
        return self.W_x.shape[1]

    @classmethod
    def init(cls, kind: str, input_width: int, hidden: int, rng: np.random.Generator) -> "RecurrentCellParams":
        if kind not in nc.GATES:
            raise ContractError(f"cell kind must be one of {CELL_KINDS}, got {kind!r}")
        G = nc.GATES[kind] * hidden
        bound = 1.0 / np.sqrt(hidden)

        def u(shape):
            return Tensor(rng.uniform(-bound, bound, shape), requires_grad=True)

        return cls(kind, u((G, input_width)), u((G, hidden)), u((G,)), u((G,)))

    def named(self) -> dict[str, Tensor]:
        return {"W_x": self.W_x, "W_h": self.W_h, "b_x": self.b_x, "b_h": self.b_h}

    def scan(self, x, h0, c0=None, reverse: bool = False, where: str = "scan"):
        """Run over (B, T, in); returns ``(H, c_last)``."""
        x = nc.as_tensor(x)
        if x.shape[-1] != self.input_width:
            raise ContractError(f"cell input width {x.shape[-1]} != {self.input_width}")
        if self.kind == "lstm" and c0 is None:
            c0 = np.zeros_like(nc.as_tensor(h0).data)
        return nc.recurrent_scan(
            self.kind, x, h0, c0, self.W_x, self.W_h, self.b_x, self.b_h, reverse=reverse, where=where
        )

    def step(self, x_t, h, c=None, where: str = "step"):
        """Advance one step on (B, in); returns ``(h', c')``."""
        x_t = nc.as_tensor(x_t)
        B = x_t.shape[0]
        H, c_new = self.scan(nc.reshape(x_t, (B, 1, x_t.shape[-1])), h, c, where=where)
        return nc.reshape(H, (B, self.hidden)), c_new
