"""Deterministic float64 numerical core: tensors, reverse-mode AD, LSTM/dense layers, Adam."""
from . import kernels
from .adam import AdamState, adam_step, clip_by_global_norm, global_norm
from .gradcheck import GradCheckResult, check_gradients, relative_error
from .layers import (
    DenseParams,
    LstmCellParams,
    dense,
    init_dense,
    init_lstm,
    lstm_cell,
    lstm_scan,
    residual_rollout,
    zeros_state,
)
from .tensor import (
    Graph,
    Tensor,
    add,
    as_tensor,
    backward,
    checked_mode,
    clamp,
    concat,
    getitem,
    log,
    matmul,
    mean,
    mul,
    neg,
    reshape,
    sigmoid,
    square,
    stack,
    sub,
    tanh,
    transpose,
)
from .tensor import sum as tsum

BACKEND = kernels.BACKEND

__all__ = [
    "AdamState", "BACKEND", "DenseParams", "GradCheckResult", "Graph", "LstmCellParams", "Tensor",
    "adam_step", "add", "as_tensor", "backward", "check_gradients", "checked_mode", "clamp",
    "clip_by_global_norm", "concat", "dense", "getitem", "global_norm", "init_dense", "init_lstm",
    "log", "lstm_cell", "lstm_scan", "matmul", "mean", "mul", "neg", "relative_error", "reshape",
    "residual_rollout", "sigmoid", "square", "stack", "sub", "tanh", "transpose", "tsum", "zeros_state",
]
