"""Finite-difference gradient suite over every primitive and both training losses."""
import numpy as np

from .model import (
    LossWeights, ModelConfig, discriminate_tm, discriminator_loss, forecast_tm, generator_loss, init_params,
)
from .motiondata.layout import FRAME_DIM, SEGMENTS, segment_columns
from .numkernel import (
    DenseParams, LstmCellParams, Tensor, add, check_gradients, clamp, concat, dense, getitem, log, lstm_cell,
    lstm_scan, matmul, mean, mul, neg, reshape, residual_rollout, sigmoid, square, stack, sub, tanh, transpose,
    tsum,
)

TOY = ModelConfig(enc_hidden=4, gen_hidden=4, disc_hidden=4, context_dim=3, n_obs=3, n_future=2)


class _Contract:
    """Reduce a tensor to a scalar with random weights fixed per output shape."""

    def __init__(self, rng):
        self.rng = rng
        self.cache = {}

    def __call__(self, t):
        if t.shape not in self.cache:
            self.cache[t.shape] = self.rng.normal(size=t.shape)
        return tsum(mul(t, self.cache[t.shape]))


def primitive_cases(rng):
    """``(name, fn, inputs)`` for each primitive, on random shapes of size <= 8."""
    r = lambda *s: rng.normal(size=s)  # noqa: E731
    _weighted = _Contract(np.random.default_rng(rng.integers(1 << 31)))
    H, D, B = 4, 3, 2

    def lstm_inputs(d_in):
        return {"w_ih": r(d_in, 4 * H) * 0.5, "w_hh": r(H, 4 * H) * 0.5, "b": r(4 * H) * 0.5}

    def cell(d):
        return LstmCellParams(d["w_ih"], d["w_hh"], d["b"])

    return [
        ("matmul", lambda d: _weighted(matmul(d["a"], d["b"])), {"a": r(3, 4), "b": r(4, 5)}),
        ("add", lambda d: _weighted(add(d["a"], d["b"])), {"a": r(3, 4), "b": r(4)}),
        ("sub", lambda d: _weighted(sub(d["a"], d["b"])), {"a": r(3, 4), "b": r(3, 4)}),
        ("mul", lambda d: _weighted(mul(d["a"], d["b"])), {"a": r(3, 4), "b": r(3, 4)}),
        ("neg", lambda d: _weighted(neg(d["a"])), {"a": r(5)}),
        ("square", lambda d: _weighted(square(d["a"])), {"a": r(2, 3)}),
        ("sigmoid", lambda d: _weighted(sigmoid(d["a"])), {"a": r(2, 4)}),
        ("tanh", lambda d: _weighted(tanh(d["a"])), {"a": r(2, 4)}),
        ("log", lambda d: _weighted(log(d["a"])), {"a": rng.uniform(0.5, 2.0, size=(2, 3))}),
        ("clamp", lambda d: _weighted(clamp(d["a"], -10.0, 10.0)), {"a": r(2, 3)}),
        ("sum", lambda d: _weighted(tsum(d["a"], axis=1)), {"a": r(3, 4)}),
        ("mean", lambda d: mul(mean(square(d["a"])), 3.0), {"a": r(3, 4)}),
        ("reshape", lambda d: _weighted(reshape(d["a"], (4, 3))), {"a": r(3, 4)}),
        ("transpose", lambda d: _weighted(transpose(d["a"], (1, 0, 2))), {"a": r(2, 3, 2)}),
        ("getitem", lambda d: _weighted(getitem(d["a"], (slice(1, 3), 2))), {"a": r(4, 5)}),
        ("concat", lambda d: _weighted(concat([d["a"], d["b"]], axis=1)), {"a": r(2, 3), "b": r(2, 2)}),
        ("stack", lambda d: _weighted(stack([d["a"], d["b"]], axis=0)), {"a": r(2, 3), "b": r(2, 3)}),
        (
            "dense",
            lambda d: _weighted(dense(d["x"], DenseParams(d["w"], d["b"]))),
            {"x": r(B, 5), "w": r(5, 3), "b": r(3)},
        ),
        (
            "lstm_cell",
            lambda d: _weighted(concat(lstm_cell(d["x"], d["h"], d["c"], cell(d)), axis=1)),
            {"x": r(B, D), "h": r(B, H), "c": r(B, H), **lstm_inputs(D)},
        ),
        (
            "lstm_scan",
            lambda d: _weighted(lstm_scan(d["x"], d["h0"], d["c0"], cell(d))),
            {"x": r(5, B, D), "h0": r(B, H), "c0": r(B, H), **lstm_inputs(D)},
        ),
        (
            "residual_rollout",
            lambda d: _weighted(
                residual_rollout(d["prev"], d["ctx"], d["h0"], d["c0"], cell(d), DenseParams(d["w_o"], d["b_o"]), 4)
            ),
            {"prev": r(B, D), "ctx": r(B, 2), "h0": r(B, H), "c0": r(B, H), **lstm_inputs(D + 2),
             "w_o": r(H, D) * 0.5, "b_o": r(D) * 0.1},
        ),
    ]


def toy_batch(rng, config=TOY, batch=2):
    shape = lambda n: (n, batch, FRAME_DIM)  # noqa: E731
    return rng.normal(size=shape(config.n_obs)), rng.normal(size=shape(config.n_obs)), rng.normal(size=shape(config.n_future))


def model_loss_cases(rng, config=TOY):
    params = init_params(config, int(rng.integers(1 << 31)))
    # random biases so no gradient is identically zero by construction
    params = params.replace({n: rng.normal(scale=0.3, size=a.shape) for n, a in params.tensors.items() if n.endswith(".b")})
    tgt, par, fut = toy_batch(rng, config)
    g_names, d_names = params.generator_names(), params.discriminator_names()
    weights = LossWeights()

    def lg(d):
        w = {**{n: Tensor(params.tensors[n]) for n in d_names}, **d}
        merged, segs = forecast_tm(Tensor(tgt), Tensor(par), w, config.n_future)
        truth = {s: fut[:, :, segment_columns(s)] for s in SEGMENTS}
        return generator_loss(segs, truth, discriminate_tm(merged, w), weights, True)

    fake = forecast_tm(Tensor(tgt), Tensor(par), {n: Tensor(a) for n, a in params.tensors.items()}, config.n_future)[0].data

    def ld(d):
        return discriminator_loss(discriminate_tm(Tensor(fut), d), discriminate_tm(Tensor(fake), d))

    return [("generator_loss", lg, params.subset(g_names)), ("discriminator_loss", ld, params.subset(d_names))]


def run_gradcheck(seed=0, step=1e-5, max_entries=16):
    """Check every case; returns a list of :class:`GradCheckResult`."""
    rng = np.random.default_rng(seed)
    results = []
    for name, fn, inputs in primitive_cases(rng) + model_loss_cases(rng):
        results.append(check_gradients(fn, inputs, name=name, step=step, max_entries=max_entries, rng=rng))
    return results
