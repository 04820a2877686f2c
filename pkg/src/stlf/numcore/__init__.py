"""Minimal differentiable numerics: tensors, kernels, Adam and LR decay."""

from .gradcheck import NonDeterministicForward, gradient_check, relative_error
from .optim import AdamState, LrSchedule, adam_step, clip_grad_norm
from .recurrent import GATES, NumericalDivergenceError, recurrent_scan
from .tensor import (
    ContractError,
    Tensor,
    absolute,
    add,
    as_tensor,
    concat,
    getitem,
    linear,
    matmul,
    mean,
    mul,
    no_grad,
    relu,
    reshape,
    sigmoid,
    softmax,
    softmax_array,
    square,
    stack,
    sub,
    tanh,
)
from .tensor import sum as tsum


def softmax_stable(v):
    """Softmax of a 1-D vector after subtracting its maximum."""
    return softmax_array(v, axis=-1)


__all__ = [
    "AdamState",
    "ContractError",
    "GATES",
    "LrSchedule",
    "NonDeterministicForward",
    "NumericalDivergenceError",
    "Tensor",
    "absolute",
    "adam_step",
    "add",
    "as_tensor",
    "clip_grad_norm",
    "concat",
    "getitem",
    "gradient_check",
    "linear",
    "matmul",
    "mean",
    "mul",
    "no_grad",
    "recurrent_scan",
    "relative_error",
    "relu",
    "reshape",
    "sigmoid",
    "softmax",
    "softmax_array",
    "softmax_stable",
    "square",
    "stack",
    "sub",
    "tanh",
    "tsum",
]
