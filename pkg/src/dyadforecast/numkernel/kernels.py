"""Recurrent inner loops: LSTM scan and the residual autoregressive rollout.

Each kernel exists twice, a loop version compiled with numba and a
vectorised numpy version.  Both take the same arguments and return the
same arrays; the public names at the bottom pick one according to
``_accel.USE_NUMBA``.

Gate layout along the last axis of every ``4H`` array is
``[input, forget, cell, output]``.  Saved activations carry a fifth block
holding ``tanh(c_t)`` for the backward sweep.  Input projections that do
not depend on the recurrence (``x @ W_ih + b`` for the scan, ``ctx @ W_ctx + b`` for the
rollout) are computed by the caller in a single large matmul.
"""
import math

import numpy as np

from ._accel import USE_NUMBA, optional_njit


def sigmoid_np(z):
    # tanh form avoids overflow warnings from exp(-z) at large |z|
    return 0.5 * (1.0 + np.tanh(0.5 * z))


# ----------------------------------------------------------------------------
# numba versions


# Scalar libm tanh is the slowest part of a compiled step; the exp forms
# below are roughly twice as fast and exact to a few ulp.
@optional_njit(cache=True, inline="always")
def _sig(z):
    return 1.0 / (1.0 + math.exp(-z))


@optional_njit(cache=True, inline="always")
def _tanh(z):
    return 2.0 / (1.0 + math.exp(-2.0 * z)) - 1.0


@optional_njit(cache=True)
def _cell_forward(z, c_prev, acts_t, h_out, c_out):
    B = z.shape[0]
    H = z.shape[1] // 4
    for b in range(B):
        for j in range(H):
            i = _sig(z[b, j])
            f = _sig(z[b, H + j])
            g = _tanh(z[b, 2 * H + j])
            o = _sig(z[b, 3 * H + j])
            c = f * c_prev[b, j] + i * g
            tc = _tanh(c)
            acts_t[b, j] = i
            acts_t[b, H + j] = f
            acts_t[b, 2 * H + j] = g
            acts_t[b, 3 * H + j] = o
            acts_t[b, 4 * H + j] = tc
            c_out[b, j] = c
            h_out[b, j] = o * tc


@optional_njit(cache=True)
def _cell_backward(dh, dc_next, acts_t, c_prev, dz_t):
    # dc_next is updated in place to the gradient w.r.t. c_prev
    B, G = dz_t.shape
    H = G // 4
    for b in range(B):
        for j in range(H):
            i = acts_t[b, j]
            f = acts_t[b, H + j]
            g = acts_t[b, 2 * H + j]
            o = acts_t[b, 3 * H + j]
            tc = acts_t[b, 4 * H + j]
            d_o = dh[b, j] * tc
            dc = dh[b, j] * o * (1.0 - tc * tc) + dc_next[b, j]
            dz_t[b, j] = dc * g * i * (1.0 - i)
            dz_t[b, H + j] = dc * c_prev[b, j] * f * (1.0 - f)
            dz_t[b, 2 * H + j] = dc * i * (1.0 - g * g)
            dz_t[b, 3 * H + j] = d_o * o * (1.0 - o)
            dc_next[b, j] = dc * f


@optional_njit(cache=True)
def _lstm_forward_nb(xw, w_hh, h0, c0):
    T, B, G = xw.shape
    H = G // 4
    hs = np.empty((T + 1, B, H))
    cs = np.empty((T + 1, B, H))
    acts = np.empty((T, B, 5 * H))
    hs[0] = h0
    cs[0] = c0
    for t in range(T):
        z = xw[t] + np.dot(hs[t], w_hh)
        _cell_forward(z, cs[t], acts[t], hs[t + 1], cs[t + 1])
    return hs, cs, acts


@optional_njit(cache=True)
def _lstm_backward_nb(dhs, dc_last, w_hh_t, acts, cs):
    T, B, A = acts.shape
    H = A // 5
    G = 4 * H
    dz = np.empty((T, B, G))
    dh_next = np.zeros((B, H))
    dc_next = dc_last.copy()
    for t in range(T - 1, -1, -1):
        dh = dhs[t] + dh_next
        _cell_backward(dh, dc_next, acts[t], cs[t], dz[t])
        dh_next = np.dot(dz[t], w_hh_t)
    return dz, dh_next, dc_next


@optional_njit(cache=True)
def _rollout_forward_nb(prev0, ctxw, w_p, w_hh, h0, c0, w_o, b_o, steps):
    B, d = prev0.shape
    H = h0.shape[1]
    prevs = np.empty((steps + 1, B, d))
    hs = np.empty((steps + 1, B, H))
    cs = np.empty((steps + 1, B, H))
    acts = np.empty((steps, B, 5 * H))
    prevs[0] = prev0
    hs[0] = h0
    cs[0] = c0
    for t in range(steps):
        z = np.dot(prevs[t], w_p) + np.dot(hs[t], w_hh) + ctxw
        _cell_forward(z, cs[t], acts[t], hs[t + 1], cs[t + 1])
        delta = np.dot(hs[t + 1], w_o)
        for b in range(B):
            for k in range(d):
                prevs[t + 1, b, k] = prevs[t, b, k] + delta[b, k] + b_o[k]
    return prevs, hs, cs, acts


@optional_njit(cache=True)
def _rollout_backward_nb(dout, w_p_t, w_hh_t, w_o_t, acts, cs):
    steps, B, A = acts.shape
    H = A // 5
    G = 4 * H
    d = dout.shape[2]
    dz = np.empty((steps, B, G))
    g_outs = np.empty((steps, B, d))
    g_prev = np.zeros((B, d))
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    for t in range(steps - 1, -1, -1):
        g_out = dout[t] + g_prev
        g_outs[t] = g_out
        dh = np.dot(g_out, w_o_t) + dh_next
        _cell_backward(dh, dc_next, acts[t], cs[t], dz[t])
        dh_next = np.dot(dz[t], w_hh_t)
        g_prev = g_out + np.dot(dz[t], w_p_t)
    return dz, g_outs, g_prev, dh_next, dc_next


# ----------------------------------------------------------------------------
# numpy versions


def _cell_forward_np(z, c_prev):
    H = z.shape[1] // 4
    i = sigmoid_np(z[:, :H])
    f = sigmoid_np(z[:, H:2 * H])
    g = np.tanh(z[:, 2 * H:3 * H])
    o = sigmoid_np(z[:, 3 * H:])
    c = f * c_prev + i * g
    tc = np.tanh(c)
    return np.concatenate([i, f, g, o, tc], axis=1), o * tc, c


def _cell_backward_np(dh, dc_next, acts_t, c_prev):
    H = acts_t.shape[1] // 5
    i = acts_t[:, :H]
    f = acts_t[:, H:2 * H]
    g = acts_t[:, 2 * H:3 * H]
    o = acts_t[:, 3 * H:4 * H]
    tc = acts_t[:, 4 * H:]
    dc = dh * o * (1.0 - tc * tc) + dc_next
    dz = np.concatenate(
        [dc * g * i * (1.0 - i),
         dc * c_prev * f * (1.0 - f),
         dc * i * (1.0 - g * g),
         dh * tc * o * (1.0 - o)],
        axis=1,
    )
    return dz, dc * f


def _lstm_forward_np(xw, w_hh, h0, c0):
    T, B, G = xw.shape
    H = G // 4
    hs = np.empty((T + 1, B, H))
    cs = np.empty((T + 1, B, H))
    acts = np.empty((T, B, 5 * H))
    hs[0] = h0
    cs[0] = c0
    for t in range(T):
        z = xw[t] + hs[t] @ w_hh
        acts[t], hs[t + 1], cs[t + 1] = _cell_forward_np(z, cs[t])
    return hs, cs, acts


def _lstm_backward_np(dhs, dc_last, w_hh_t, acts, cs):
    T, B, A = acts.shape
    H = A // 5
    G = 4 * H
    dz = np.empty((T, B, G))
    dh_next = np.zeros((B, H))
    dc_next = np.array(dc_last, dtype=np.float64)
    for t in range(T - 1, -1, -1):
        dz[t], dc_next = _cell_backward_np(dhs[t] + dh_next, dc_next, acts[t], cs[t])
        dh_next = dz[t] @ w_hh_t
    return dz, dh_next, dc_next


def _rollout_forward_np(prev0, ctxw, w_p, w_hh, h0, c0, w_o, b_o, steps):
    B, d = prev0.shape
    H = h0.shape[1]
    prevs = np.empty((steps + 1, B, d))
    hs = np.empty((steps + 1, B, H))
    cs = np.empty((steps + 1, B, H))
    acts = np.empty((steps, B, 5 * H))
    prevs[0] = prev0
    hs[0] = h0
    cs[0] = c0
    for t in range(steps):
        z = prevs[t] @ w_p + hs[t] @ w_hh + ctxw
        acts[t], hs[t + 1], cs[t + 1] = _cell_forward_np(z, cs[t])
        prevs[t + 1] = prevs[t] + (hs[t + 1] @ w_o + b_o)
    return prevs, hs, cs, acts


def _rollout_backward_np(dout, w_p_t, w_hh_t, w_o_t, acts, cs):
    steps, B, A = acts.shape
    H = A // 5
    G = 4 * H
    d = dout.shape[2]
    dz = np.empty((steps, B, G))
    g_outs = np.empty((steps, B, d))
    g_prev = np.zeros((B, d))
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    for t in range(steps - 1, -1, -1):
        g_out = dout[t] + g_prev
        g_outs[t] = g_out
        dz[t], dc_next = _cell_backward_np(g_out @ w_o_t + dh_next, dc_next, acts[t], cs[t])
        dh_next = dz[t] @ w_hh_t
        g_prev = g_out + dz[t] @ w_p_t
    return dz, g_outs, g_prev, dh_next, dc_next


NUMBA_KERNELS = {
    "lstm_forward": _lstm_forward_nb,
    "lstm_backward": _lstm_backward_nb,
    "rollout_forward": _rollout_forward_nb,
    "rollout_backward": _rollout_backward_nb,
}
NUMPY_KERNELS = {
    "lstm_forward": _lstm_forward_np,
    "lstm_backward": _lstm_backward_np,
    "rollout_forward": _rollout_forward_np,
    "rollout_backward": _rollout_backward_np,
}

_active = NUMBA_KERNELS if USE_NUMBA else NUMPY_KERNELS
lstm_forward = _active["lstm_forward"]
lstm_backward = _active["lstm_backward"]
rollout_forward = _active["rollout_forward"]
rollout_backward = _active["rollout_backward"]
BACKEND = "numba" if USE_NUMBA else "numpy"
