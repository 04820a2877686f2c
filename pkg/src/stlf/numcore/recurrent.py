"""Fused recurrent scan with an analytic backward pass (BPTT).

One tape node covers a whole sequence so that the Python overhead of the
168-step encoder is a single loop rather than ~15 nodes per step. Gate
layouts follow the usual conventions:

* ``rnn``:  h' = tanh(Wx x + bx + Wh h + bh)
* ``lstm``: gates (i, f, g, o); c' = f*c + i*g; h' = o*tanh(c')
* ``gru``:  gates (r, z, n); n = tanh(xn + r*(Wh_n h + bh_n)); h' = (1-z)*n + z*h
"""

from __future__ import annotations

import numpy as np

from .tensor import ContractError, Tensor, _record, _sigmoid, as_tensor

GATES = {"rnn": 1, "lstm": 4, "gru": 3}


class NumericalDivergenceError(FloatingPointError):
    """A hidden state became NaN or infinite during a scan."""

    def __init__(self, step: int, where: str = "scan"):
        super().__init__(f"non-finite hidden state in {where} at step {step}")
        self.step = step


def recurrent_scan(
    kind: str,
    x,
    h0,
    c0,
    w_x,
    w_h,
    b_x,
    b_h,
    reverse: bool = False,
    where: str = "scan",
) -> tuple[Tensor, Tensor | None]:
    """Run a cell over ``x`` of shape (B, T, in).

    Returns ``(H, c_last)`` where ``H[:, t]`` is the hidden state after
    consuming step ``t`` (in time order even when ``reverse``) and
    ``c_last`` is the final LSTM cell state (``None`` for rnn/gru).
    """
    if kind not in GATES:
        raise ContractError(f"unknown cell kind {kind!r}")
    x, h0, w_x, w_h, b_x, b_h = map(as_tensor, (x, h0, w_x, w_h, b_x, b_h))
    lstm = kind == "lstm"
    if lstm:
        c0 = as_tensor(c0)
    B, T, n_in = x.shape
    hs = w_h.shape[1]
    G = GATES[kind] * hs
    if w_x.shape != (G, n_in) or w_h.shape != (G, hs) or b_x.shape != (G,) or b_h.shape != (G,):
        raise ContractError(
            f"{kind} weights have shapes {w_x.shape}, {w_h.shape}, {b_x.shape}, {b_h.shape};"
            f" expected ({G}, {n_in}), ({G}, {hs}), ({G},), ({G},)"
        )
    if h0.shape != (B, hs):
        raise ContractError(f"initial state shape {h0.shape} != {(B, hs)}")

    Wx, Wh, bx, bh = w_x.data, w_h.data, b_x.data, b_h.data
    xp = x.data @ Wx.T + bx  # (B, T, G)
    steps = range(T - 1, -1, -1) if reverse else range(T)

    H = np.empty((B, T, hs))
    h_prev_all = np.empty((B, T, hs))
    cache = np.empty((B, T, G))  # post-activation gates
    aux = np.empty((B, T, hs)) if kind != "rnn" else None  # lstm: c_prev, gru: Wh_n h + bh_n
    c_all = np.empty((B, T, hs)) if lstm else None
    h = h0.data
    c = c0.data if lstm else None
    for t in steps:
        h_prev_all[:, t] = h
        hp = h @ Wh.T + bh
        z = xp[:, t]
        if kind == "rnn":
            h = np.tanh(z + hp)
            cache[:, t] = h
        elif lstm:
            pre = z + hp
            i = _sigmoid(pre[:, :hs])
            f = _sigmoid(pre[:, hs : 2 * hs])
            g = np.tanh(pre[:, 2 * hs : 3 * hs])
            o = _sigmoid(pre[:, 3 * hs :])
            aux[:, t] = c
            c = f * c + i * g
            c_all[:, t] = c
            h = o * np.tanh(c)
            cache[:, t] = np.concatenate([i, f, g, o], axis=1)
        else:
            r = _sigmoid(z[:, :hs] + hp[:, :hs])
            u = _sigmoid(z[:, hs : 2 * hs] + hp[:, hs : 2 * hs])
            hn = hp[:, 2 * hs :]
            nn = np.tanh(z[:, 2 * hs :] + r * hn)
            h = (1.0 - u) * nn + u * h
            aux[:, t] = hn
            cache[:, t] = np.concatenate([r, u, nn], axis=1)
        if not np.all(np.isfinite(h)):
            raise NumericalDivergenceError(t, where)
        H[:, t] = h

    outputs = [H] + ([c.copy()] if lstm else [])
    inputs = (x, h0, w_x, w_h, b_x, b_h) + ((c0,) if lstm else ())

    def backward(grads):
        dH = grads[0]
        dh = np.zeros((B, hs))
        dc = grads[1].copy() if lstm else None
        dxp = np.empty((B, T, G))
        dWh = np.zeros_like(Wh)
        dbh = np.zeros_like(bh)
        for t in reversed(list(steps)):
            dh = dh + dH[:, t]
            hprev = h_prev_all[:, t]
            gates = cache[:, t]
            if kind == "rnn":
                hcur = gates
                dpre = dh * (1.0 - hcur * hcur)
                dzx = dhp = dpre
            elif lstm:
                i, f, g, o = (gates[:, k * hs : (k + 1) * hs] for k in range(4))
                tc = np.tanh(c_all[:, t])
                do = dh * tc
                dc = dc + dh * o * (1.0 - tc * tc)
                di = dc * g
                dg = dc * i
                df = dc * aux[:, t]
                dc = dc * f
                dzx = dhp = np.concatenate(
                    [di * i * (1 - i), df * f * (1 - f), dg * (1 - g * g), do * o * (1 - o)], axis=1
                )
            else:
                r, u, nn = (gates[:, k * hs : (k + 1) * hs] for k in range(3))
                hn = aux[:, t]
                dnn = dh * (1.0 - u)
                du = dh * (hprev - nn)
                dpre_n = dnn * (1.0 - nn * nn)
                dpre_r = dpre_n * hn * r * (1.0 - r)
                dpre_u = du * u * (1.0 - u)
                dzx = np.concatenate([dpre_r, dpre_u, dpre_n], axis=1)
                dhp = np.concatenate([dpre_r, dpre_u, dpre_n * r], axis=1)
            dxp[:, t] = dzx
            dWh += dhp.T @ hprev
            dbh += dhp.sum(axis=0)
            dh_next = dhp @ Wh
            if kind == "gru":
                dh_next = dh_next + dh * u
            dh = dh_next
        flat = dxp.reshape(-1, G)
        gx = dxp @ Wx
        gWx = flat.T @ x.data.reshape(-1, n_in)
        gbx = flat.sum(axis=0)
        out = [gx, dh, gWx, dWh, gbx, dbh]
        if lstm:
            out.append(dc)
        return out

    outs = _record(inputs, outputs, backward)
    return outs[0], (outs[1] if lstm else None)
