"""Dense/convolutional tensor primitives with reverse-mode autodiff and Adam."""

from .container import ContainerError, load_tensors, save_tensors
from .gradcheck import GradCheckReport, grad_check
from .optim import AdamState, adam_step, init_adam
from .ops import (
    add,
    conv2d,
    dense,
    matmul,
    max_pool2,
    mean_,
    mse,
    mul,
    neg,
    relu,
    reshape,
    sub,
    sum_,
    transpose,
    upsample_nearest2,
)
from .tensor import Tape, TapeError, Tensor, as_tensor

__all__ = [
    "AdamState",
    "ContainerError",
    "GradCheckReport",
    "Tape",
    "TapeError",
    "Tensor",
    "adam_step",
    "add",
    "as_tensor",
    "conv2d",
    "dense",
    "grad_check",
    "init_adam",
    "load_tensors",
    "matmul",
    "max_pool2",
    "mean_",
    "mse",
    "mul",
    "neg",
    "relu",
    "reshape",
    "save_tensors",
    "sub",
    "sum_",
    "transpose",
    "upsample_nearest2",
]
