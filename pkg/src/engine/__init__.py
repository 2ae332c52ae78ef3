from engine.tensor import DEFAULT_DTYPE, Function, Graph, Parameter, Tensor, backward, no_grad, resolve_dtype
from engine.functions import (
    add,
    conv2d,
    dense,
    flatten,
    global_avg_pool,
    mean_abs_diff,
    pool2d,
    relu,
    scale,
    softmax,
    softmax_cross_entropy,
)
from engine.optim import halving_schedule, sgd_step, xavier_init

__all__ = [
    "DEFAULT_DTYPE",
    "Function",
    "Graph",
    "Parameter",
    "Tensor",
    "add",
    "backward",
    "conv2d",
    "dense",
    "flatten",
    "global_avg_pool",
    "halving_schedule",
    "mean_abs_diff",
    "no_grad",
    "pool2d",
    "relu",
    "resolve_dtype",
    "scale",
    "sgd_step",
    "softmax",
    "softmax_cross_entropy",
    "xavier_init",
]
