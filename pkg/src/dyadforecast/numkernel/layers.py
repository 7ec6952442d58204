"""LSTM and dense layers on top of the tensor tape.

``lstm_cell`` is written with primitive ops and serves as the reference
step.  ``lstm_scan`` and ``residual_rollout`` run whole sequences through
the compiled kernels and register a single tape node each, which keeps
the graph small when unrolling 100-step sequences.
"""
from dataclasses import dataclass
from typing import Any

import numpy as np

from ..errors import DimensionError
from . import kernels
from .tensor import Tensor, _record, add, as_tensor, matmul, mul, sigmoid, tanh

FORGET_BIAS = 1.0


@dataclass
class LstmCellParams:
    """Gate weights in ``[input, forget, cell, output]`` column order.

    ``w_ih`` is (input_dim, 4H), ``w_hh`` is (H, 4H) and ``b`` is (4H,).
    Fields may hold numpy arrays or :class:`Tensor` leaves.
    """

    w_ih: Any
    w_hh: Any
    b: Any

    @property
    def input_dim(self):
        return self.w_ih.shape[0]

    @property
    def hidden_dim(self):
        return self.w_hh.shape[0]

    def validate(self):
        d, g = self.w_ih.shape
        h = self.w_hh.shape[0]
        if g != 4 * h or self.w_hh.shape != (h, 4 * h) or self.b.shape != (4 * h,):
            raise DimensionError(
                f"inconsistent LSTM shapes w_ih={self.w_ih.shape} w_hh={self.w_hh.shape} b={self.b.shape}"
            )


@dataclass
class DenseParams:
    w: Any
    b: Any

    @property
    def in_dim(self):
        return self.w.shape[0]

    @property
    def out_dim(self):
        return self.w.shape[1]

    def validate(self):
        if self.w.ndim != 2 or self.b.shape != (self.w.shape[1],):
            raise DimensionError(f"inconsistent dense shapes w={self.w.shape} b={self.b.shape}")


def init_lstm(rng, input_dim, hidden_dim):
    """Uniform(+-1/sqrt(fan_in)) weights, zero biases except forget = 1."""
    k_in = 1.0 / np.sqrt(input_dim)
    k_h = 1.0 / np.sqrt(hidden_dim)
    w_ih = rng.uniform(-k_in, k_in, size=(input_dim, 4 * hidden_dim))
    w_hh = rng.uniform(-k_h, k_h, size=(hidden_dim, 4 * hidden_dim))
    b = np.zeros(4 * hidden_dim)
    b[hidden_dim:2 * hidden_dim] = FORGET_BIAS
    return LstmCellParams(w_ih, w_hh, b)


def init_dense(rng, in_dim, out_dim):
    k = 1.0 / np.sqrt(in_dim)
    return DenseParams(rng.uniform(-k, k, size=(in_dim, out_dim)), np.zeros(out_dim))


def dense(x, p):
    x = as_tensor(x)
    if x.shape[-1] != p.w.shape[0]:
        raise DimensionError(f"dense: input width {x.shape[-1]} does not match weights {p.w.shape}")
    return add(matmul(x, p.w), p.b)


def lstm_cell(x, h, c_state, p):
    """One LSTM step built from primitive ops; returns ``(h_new, c_new)``.

    Accepts single vectors or batches (rows).
    """
    x, h, c_state = as_tensor(x), as_tensor(h), as_tensor(c_state)
    H = p.w_hh.shape[0]
    if x.shape[-1] != p.w_ih.shape[0] or h.shape[-1] != H or c_state.shape[-1] != H:
        raise DimensionError(
            f"lstm_cell: x {x.shape}, h {h.shape}, c {c_state.shape} vs w_ih {p.w_ih.shape}"
        )
    z = add(add(matmul(x, p.w_ih), matmul(h, p.w_hh)), p.b)
    i = sigmoid(z[..., :H])
    f = sigmoid(z[..., H:2 * H])
    g = tanh(z[..., 2 * H:3 * H])
    o = sigmoid(z[..., 3 * H:])
    c_new = add(mul(f, c_state), mul(i, g))
    h_new = mul(o, tanh(c_new))
    return h_new, c_new


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def lstm_scan(x, h0, c0, p):
    """Run an LSTM over a time-major sequence ``x`` of shape (T, B, D).

    Returns one tensor of shape (T + 1, B, H): rows ``0..T-1`` are the
    hidden states after each step and row ``T`` is the final cell state.
    """
    x, h0, c0 = as_tensor(x), as_tensor(h0), as_tensor(c0)
    w_ih, w_hh, b = as_tensor(p.w_ih), as_tensor(p.w_hh), as_tensor(p.b)
    if x.ndim != 3 or x.shape[2] != w_ih.shape[0]:
        raise DimensionError(f"lstm_scan: input {x.shape} vs w_ih {w_ih.shape}")
    T, B, D = x.shape
    H = w_hh.shape[0]
    if h0.shape != (B, H) or c0.shape != (B, H):
        raise DimensionError(f"lstm_scan: initial state {h0.shape}/{c0.shape}, expected {(B, H)}")
    xw = _c((x.data.reshape(T * B, D) @ w_ih.data + b.data).reshape(T, B, 4 * H))
    hs, cs, acts = kernels.lstm_forward(xw, _c(w_hh.data), _c(h0.data), _c(c0.data))
    out = np.concatenate([hs[1:], cs[-1:]], axis=0)

    def grad_fn(g):
        dz, dh0, dc0 = kernels.lstm_backward(
            _c(g[:T]), _c(g[T]), _c(w_hh.data.T), acts, cs
        )
        dz2 = dz.reshape(T * B, 4 * H)
        dx = (dz2 @ w_ih.data.T).reshape(T, B, D)
        dw_ih = x.data.reshape(T * B, D).T @ dz2
        dw_hh = hs[:-1].reshape(T * B, H).T @ dz2
        db = dz2.sum(axis=0)
        return dx, dh0, dc0, dw_ih, dw_hh, db

    return _record(out, (x, h0, c0, w_ih, w_hh, b), grad_fn)


def residual_rollout(prev0, ctx, h0, c0, cell, out_layer, steps):
    """Autoregressive residual decoder.

    Step ``t`` feeds ``[prev_t, ctx]`` through the LSTM ``cell``, maps the
    hidden state through ``out_layer`` to a displacement and emits
    ``prev_{t+1} = prev_t + displacement``.  ``prev0`` is the last observed
    frame (B, d); ``ctx`` (B, C) is appended to the input at every step.
    Returns the emitted frames, shape (steps, B, d).
    """
    prev0, ctx, h0, c0 = (as_tensor(a) for a in (prev0, ctx, h0, c0))
    w_ih, w_hh, b = as_tensor(cell.w_ih), as_tensor(cell.w_hh), as_tensor(cell.b)
    w_o, b_o = as_tensor(out_layer.w), as_tensor(out_layer.b)
    B, d = prev0.shape
    C = ctx.shape[1]
    H = w_hh.shape[0]
    if w_ih.shape != (d + C, 4 * H) or w_o.shape != (H, d) or ctx.shape[0] != B:
        raise DimensionError(
            f"residual_rollout: frame {prev0.shape}, ctx {ctx.shape}, w_ih {w_ih.shape}, w_o {w_o.shape}"
        )
    w_p = _c(w_ih.data[:d])
    w_ctx = w_ih.data[d:]
    ctxw = _c(ctx.data @ w_ctx + b.data)
    prevs, hs, cs, acts = kernels.rollout_forward(
        _c(prev0.data), ctxw, w_p, _c(w_hh.data), _c(h0.data), _c(c0.data), _c(w_o.data), _c(b_o.data), int(steps)
    )

    def grad_fn(g):
        dz, g_outs, dprev0, dh0, dc0 = kernels.rollout_backward(
            _c(g), _c(w_p.T), _c(w_hh.data.T), _c(w_o.data.T), acts, cs
        )
        dz2 = dz.reshape(steps * B, 4 * H)
        dz_sum = dz.sum(axis=0)
        g2 = g_outs.reshape(steps * B, d)
        dw_p = prevs[:-1].reshape(steps * B, d).T @ dz2
        dw_ctx = ctx.data.T @ dz_sum
        dw_ih = np.concatenate([dw_p, dw_ctx], axis=0)
        dw_hh = hs[:-1].reshape(steps * B, H).T @ dz2
        db = dz2.sum(axis=0)
        dctx = dz_sum @ w_ctx.T
        dw_o = hs[1:].reshape(steps * B, H).T @ g2
        db_o = g2.sum(axis=0)
        return dprev0, dctx, dh0, dc0, dw_ih, dw_hh, db, dw_o, db_o

    return _record(prevs[1:].copy(), (prev0, ctx, h0, c0, w_ih, w_hh, b, w_o, b_o), grad_fn)


def zeros_state(batch, hidden):
    return Tensor(np.zeros((batch, hidden)))
