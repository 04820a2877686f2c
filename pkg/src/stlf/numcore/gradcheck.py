"""Central finite-difference verification of reverse-mode gradients."""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from .tensor import Tensor


class NonDeterministicForward(RuntimeError):
    """Two evaluations at the same parameters returned different values."""


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)


def gradient_check(
    forward: Callable[[], Tensor | float],
    params: Mapping[str, Tensor],
    max_coords: int | None = None,
    rng: np.random.Generator | None = None,
    report: dict | None = None,
    reference: Callable[[], float] | None = None,
) -> float:
    """Max relative error between backprop and central differences.

    ``forward`` must recompute a scalar loss from the current contents of
    ``params``. Each checked coordinate is perturbed by
    ``1e-6 * max(1, |theta|)``. With ``max_coords`` set, that many
    coordinates are sampled per parameter; otherwise every one is checked.
    If ``report`` is given it is filled with the per-parameter maximum.

    ``reference`` optionally supplies the function used for the difference
    quotients, e.g. the same loss evaluated in extended precision from the
    same parameter arrays. Backprop still comes from ``forward``.
    """

    def scalar(fn):
        out = fn()
        return out.data if isinstance(out, Tensor) else out

    first, second = float(scalar(forward)), float(scalar(forward))
    if first != second:
        raise NonDeterministicForward(f"forward returned {first!r} then {second!r}")
    if reference is not None:
        r1, r2 = scalar(reference), scalar(reference)
        if r1 != r2:
            raise NonDeterministicForward(f"reference returned {r1!r} then {r2!r}")

    def value():
        return scalar(reference if reference is not None else forward)

    for p in params.values():
        p.zero_grad()
    loss = forward()
    loss.backward()
    analytic = {name: (p.grad if p.grad is not None else np.zeros_like(p.data)).copy()
                for name, p in params.items()}

    rng = rng if rng is not None else np.random.default_rng(0)
    worst = 0.0
    for name, p in params.items():
        flat = p.data.reshape(-1)
        if not np.shares_memory(flat, p.data):
            raise ValueError(f"parameter {name!r} is not contiguous; cannot perturb in place")
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = rng.choice(flat.size, size=max_coords, replace=False)
        local = 0.0
        for k in coords:
            orig = flat[k]
            h = 1e-6 * max(1.0, abs(orig))
            plus, minus = orig + h, orig - h
            flat[k] = plus
            up = value()
            flat[k] = minus
            down = value()
            flat[k] = orig
            # divide by the step actually taken after float64 rounding
            numeric = float((up - down) / (np.longdouble(plus) - np.longdouble(minus)))
            local = max(local, relative_error(float(analytic[name].reshape(-1)[k]), numeric))
        if report is not None:
            report[name] = local
        worst = max(worst, local)
    return worst
