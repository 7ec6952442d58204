import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dyadforecast.errors import ContractError, DimensionError, NonFiniteError, TrainingError
from dyadforecast.numkernel import (
    AdamState, DenseParams, LstmCellParams, Tensor, adam_step, add, backward, check_gradients, checked_mode,
    clip_by_global_norm, dense, init_lstm, log, lstm_cell, lstm_scan, matmul, mul, residual_rollout, sigmoid,
    square, tsum,
)
from dyadforecast.numkernel import kernels

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def central_difference(fn, inputs, name, step=1e-5):
    """Numeric gradient of ``fn`` w.r.t. ``inputs[name]``, every coordinate."""
    base = inputs[name]
    out = np.zeros_like(base)
    for i in range(base.size):
        vals = []
        for delta in (step, -step):
            moved = base.copy()
            moved.reshape(-1)[i] += delta
            vals.append(float(fn({**inputs, name: moved}).data))
        out.reshape(-1)[i] = (vals[0] - vals[1]) / (2 * step)
    return out


def normwise_error(analytic, numeric):
    return np.linalg.norm(analytic - numeric) / max(np.linalg.norm(analytic), np.linalg.norm(numeric))


def assert_gradients_close(fn, inputs, tol):
    leaves = {k: Tensor(v, requires_grad=True) for k, v in inputs.items()}
    grads = backward(fn(leaves), wrt=list(leaves.values()))
    for name, g in zip(leaves, grads):
        err = normwise_error(g, central_difference(fn, inputs, name))
        assert err < tol, (name, err)


# matmul


@pytest.mark.parametrize(
    "a, b, expected",
    [
        ([[1, 0], [0, 1]], [[3, 4], [5, 6]], [[3, 4], [5, 6]]),
        ([[1, 2], [3, 4]], [[5, 6], [7, 8]], [[19, 22], [43, 50]]),
        ([[0, 0], [0, 0]], [[1.5, -2, 7], [3, 4, 5]], [[0, 0, 0], [0, 0, 0]]),
    ],
)
def test_matmul_examples(a, b, expected):
    out = matmul(np.array(a, float), np.array(b, float))
    assert np.array_equal(out.data, np.array(expected, float))


def test_matmul_shape_mismatch():
    with pytest.raises(DimensionError):
        matmul(np.ones((2, 3)), np.ones((2, 3)))


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (3, 3), elements=finite), arrays(np.float64, (3, 3), elements=finite),
       arrays(np.float64, (3, 3), elements=finite))
def test_matmul_identity_and_distributivity(a, b, c):
    eye = np.eye(3)
    assert np.array_equal(matmul(eye, a).data, a)
    assert np.array_equal(matmul(a, eye).data, a)
    left = matmul(a, add(b, c)).data
    right = add(matmul(a, b), matmul(a, c)).data
    assert np.allclose(left, right, rtol=0, atol=1e-12 * max(1.0, np.abs(a).max() * np.abs(b + c).max() * 3))


# lstm_cell / dense


def test_lstm_cell_zero_weights_gives_zero_hidden():
    p = LstmCellParams(np.zeros((3, 16)), np.zeros((4, 16)), np.zeros(16))
    h, c = lstm_cell(np.array([0.3, -1.0, 2.0]), np.zeros(4), np.zeros(4), p)
    assert np.array_equal(h.data, np.zeros(4))
    assert np.array_equal(c.data, np.zeros(4))


def test_lstm_cell_pure_memory():
    b = np.zeros(4)
    b[1] = 100.0  # forget gate
    p = LstmCellParams(np.zeros((1, 4)), np.zeros((1, 4)), b)
    _, c = lstm_cell(np.array([0.7]), np.zeros(1), np.array([2.0]), p)
    assert c.data[0] == pytest.approx(2.0, abs=1e-12)


def test_lstm_cell_gradients_match_finite_differences():
    rng = np.random.default_rng(3)
    inputs = {"w_ih": rng.normal(size=(3, 16)), "w_hh": rng.normal(size=(4, 16)), "b": rng.normal(size=16)}
    x, h, c = rng.normal(size=3), rng.normal(size=4), rng.normal(size=4)
    weights = rng.normal(size=4)

    def fn(d):
        h_new, _ = lstm_cell(x, h, c, LstmCellParams(d["w_ih"], d["w_hh"], d["b"]))
        return tsum(mul(h_new, weights))

    assert_gradients_close(fn, inputs, 1e-6)
    # entry-wise check with the library's floor is looser but covers every coordinate
    assert check_gradients(fn, inputs).max_rel_error < 1e-4


def test_lstm_cell_dimension_error():
    p = init_lstm(np.random.default_rng(0), 3, 4)
    with pytest.raises(DimensionError):
        lstm_cell(np.zeros(5), np.zeros(4), np.zeros(4), p)


def test_init_lstm_forget_bias_and_range():
    p = init_lstm(np.random.default_rng(0), 9, 4)
    assert np.array_equal(p.b[4:8], np.ones(4))
    assert np.array_equal(np.delete(p.b, range(4, 8)), np.zeros(12))
    assert np.abs(p.w_ih).max() <= 1 / 3
    assert np.abs(p.w_hh).max() <= 1 / 2


def test_dense_examples():
    x = np.array([0.5, -2.0, 3.0])
    assert np.array_equal(dense(x, DenseParams(np.eye(3), np.zeros(3))).data, x)
    out = dense(np.array([1.0, 1.0]), DenseParams(np.array([[1.0], [1.0]]), np.array([0.5])))
    assert out.data.tolist() == [2.5]


def test_dense_gradients():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(2, 5))
    assert_gradients_close(
        lambda d: tsum(square(dense(d["x"], DenseParams(d["w"], d["b"])))),
        {"x": x, "w": rng.normal(size=(5, 3)), "b": rng.normal(size=3)},
        1e-6,
    )


# backward


def test_backward_square():
    x = Tensor(3.0, requires_grad=True)
    (g,) = backward(square(x), wrt=[x])
    assert g == 6.0


def test_backward_sigmoid_at_zero():
    x = Tensor(np.zeros(5), requires_grad=True)
    (g,) = backward(tsum(sigmoid(x)), wrt=[x])
    assert np.array_equal(g, np.full(5, 0.25))


def test_unused_leaf_gets_exact_zero():
    x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    y = Tensor(np.array([[4.0, 5.0]]), requires_grad=True)
    gx, gy = backward(tsum(square(x)), wrt=[x, y])
    assert np.array_equal(gx, [2.0, 4.0])
    assert np.array_equal(gy, np.zeros((1, 2)))


def test_non_scalar_loss_rejected():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ContractError):
        backward(square(x), wrt=[x])


def test_log_rejects_non_positive():
    with pytest.raises(ContractError):
        log(np.array([1.0, 0.0]))


def test_shared_subexpression_accumulates():
    x = Tensor(2.0, requires_grad=True)
    y = mul(x, x)
    (g,) = backward(add(y, y), wrt=[x])
    assert g == 8.0


def test_checked_mode_rejects_nan():
    with checked_mode():
        with pytest.raises(NonFiniteError):
            Tensor(np.array([1.0, np.nan]))
    Tensor(np.array([np.nan]))


# fused kernels


def _scan_inputs(seed, T=7, B=3, D=5, H=4):
    rng = np.random.default_rng(seed)
    return (rng.normal(size=(T, B, D)), rng.normal(size=(B, H)), rng.normal(size=(B, H)),
            LstmCellParams(rng.normal(size=(D, 4 * H)) * 0.5, rng.normal(size=(H, 4 * H)) * 0.5,
                           rng.normal(size=4 * H) * 0.5))


def test_lstm_scan_matches_composite_cell():
    x, h, c, p = _scan_inputs(0)
    out = lstm_scan(x, h, c, p).data
    for t in range(len(x)):
        h, c = (a.data for a in lstm_cell(x[t], h, c, p))
        assert np.allclose(out[t], h, rtol=0, atol=1e-14)
    assert np.allclose(out[-1], c, rtol=0, atol=1e-14)


def test_residual_rollout_matches_composite_cell():
    rng = np.random.default_rng(5)
    B, D, C, H, steps = 2, 3, 2, 4, 6
    prev, ctx = rng.normal(size=(B, D)), rng.normal(size=(B, C))
    h, c = rng.normal(size=(B, H)), rng.normal(size=(B, H))
    cell = init_lstm(rng, D + C, H)
    out_layer = DenseParams(rng.normal(size=(H, D)), rng.normal(size=D))
    got = residual_rollout(prev, ctx, h, c, cell, out_layer, steps).data
    for t in range(steps):
        h, c = (a.data for a in lstm_cell(np.concatenate([prev, ctx], axis=1), h, c, cell))
        prev = prev + h @ out_layer.w + out_layer.b
        assert np.allclose(got[t], prev, rtol=0, atol=1e-13)


@pytest.mark.parametrize("name", ["lstm", "rollout"])
def test_numba_and_numpy_kernels_agree(name):
    rng = np.random.default_rng(11)
    T, B, H, D = 9, 3, 5, 4
    w_hh = rng.normal(size=(H, 4 * H)) * 0.5
    h0, c0 = rng.normal(size=(B, H)), rng.normal(size=(B, H))
    if name == "lstm":
        xw = rng.normal(size=(T, B, 4 * H))
        fwd = [k["lstm_forward"](xw, w_hh, h0, c0) for k in (kernels.NUMBA_KERNELS, kernels.NUMPY_KERNELS)]
        dhs = rng.normal(size=(T, B, H))
        bwd = [
            k["lstm_backward"](dhs, np.full((B, H), 0.3), w_hh.T.copy(), f[2], f[1])
            for k, f in zip((kernels.NUMBA_KERNELS, kernels.NUMPY_KERNELS), fwd)
        ]
    else:
        prev0, ctxw = rng.normal(size=(B, D)), rng.normal(size=(B, 4 * H))
        w_p, w_o, b_o = rng.normal(size=(D, 4 * H)), rng.normal(size=(H, D)) * 0.3, rng.normal(size=D)
        fwd = [k["rollout_forward"](prev0, ctxw, w_p, w_hh, h0, c0, w_o, b_o, T)
               for k in (kernels.NUMBA_KERNELS, kernels.NUMPY_KERNELS)]
        dout = rng.normal(size=(T, B, D))
        bwd = [
            k["rollout_backward"](dout, w_p.T.copy(), w_hh.T.copy(), w_o.T.copy(), f[3], f[2])
            for k, f in zip((kernels.NUMBA_KERNELS, kernels.NUMPY_KERNELS), fwd)
        ]
    for a, b in zip(fwd[0] + bwd[0], fwd[1] + bwd[1]):
        assert np.allclose(a, b, rtol=0, atol=1e-12)


def test_backend_env_flag_selects_numpy():
    env = dict(os.environ, DYADFC_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", "import dyadforecast.numkernel as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


def test_operations_are_deterministic():
    x, h, c, p = _scan_inputs(2)
    a = lstm_scan(x, h, c, p).data
    b = lstm_scan(x.copy(), h.copy(), c.copy(), p).data
    assert np.array_equal(a, b)


# Adam


def test_adam_zero_gradient():
    params = {"w": np.array([1.0, -2.0])}
    state = AdamState.zeros_like(params)
    state.m["w"][:] = [0.5, 0.5]
    state.v["w"][:] = [0.25, 0.25]
    _, st2 = adam_step(params, {"w": np.zeros(2)}, state, 0.1)
    assert np.array_equal(st2.m["w"], [0.45, 0.45])
    assert np.allclose(st2.v["w"], 0.999 * 0.25)
    assert st2.step == 1

    fresh = AdamState.zeros_like(params)
    new, st3 = adam_step(params, {"w": np.zeros(2)}, fresh, 0.1)
    assert np.array_equal(new["w"], params["w"])
    assert np.array_equal(st3.m["w"], np.zeros(2))


@pytest.mark.parametrize("lr", [1e-3, 0.1, 2.0])
def test_adam_first_step_is_lr_sign(lr):
    params = {"w": np.array([0.0, 1.0, -1.0, 5.0])}
    g = np.array([3.0, -0.2, 1e-2, -40.0])
    new, _ = adam_step(params, {"w": g}, AdamState.zeros_like(params), lr)
    assert np.allclose(new["w"] - params["w"], -lr * np.sign(g), rtol=1e-5)


def test_adam_scalar_descent():
    params = {"x": np.array(0.0)}
    state = AdamState.zeros_like(params)
    for _ in range(200):
        params, state = adam_step(params, {"x": 2 * (params["x"] - 3.0)}, state, 0.1)
    assert abs(float(params["x"]) - 3.0) < 0.05
    assert state.step == 200


def test_adam_nan_gradient_names_parameter():
    params = {"enc.w": np.zeros(2), "enc.b": np.zeros(1)}
    with pytest.raises(TrainingError) as exc:
        adam_step(params, {"enc.w": np.zeros(2), "enc.b": np.array([np.nan])}, AdamState.zeros_like(params), 0.1)
    assert exc.value.param == "enc.b"
    assert "enc.b" in str(exc.value)


def test_adam_leaves_inputs_untouched():
    params = {"w": np.array([1.0])}
    state = AdamState.zeros_like(params)
    adam_step(params, {"w": np.array([1.0])}, state, 0.1)
    assert params["w"][0] == 1.0 and state.step == 0 and state.m["w"][0] == 0.0


def test_clip_by_global_norm():
    grads = {"a": np.array([3.0]), "b": np.array([4.0])}
    clipped, norm = clip_by_global_norm(grads, 1.0)
    assert norm == 5.0
    assert np.allclose([clipped["a"][0], clipped["b"][0]], [0.6, 0.8])
    same, _ = clip_by_global_norm(grads, 10.0)
    assert same["a"] is grads["a"]
