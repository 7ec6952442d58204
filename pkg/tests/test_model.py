import math

import numpy as np
import pytest

from dyadforecast.errors import CheckpointVersionError, ContractError, CorruptCheckpointError, DimensionError
from dyadforecast.evaluation import baseline_constant
from dyadforecast.model import (
    PROB_EPS, LossWeights, ModelConfig, bind, discriminate, discriminate_tm, discriminator_loss, encode_partner,
    forecast, forecast_tm, generate_segment, generator_loss, generator_loss_terms, init_params, load_checkpoint,
    save_checkpoint,
)
from dyadforecast.model import checkpoint as ckpt_mod
from dyadforecast.motiondata import SEGMENT_DIMS, SEGMENTS, segment_columns, split_segments
from dyadforecast.numkernel import AdamState, Tensor, backward, mean

SMALL = ModelConfig(enc_hidden=6, gen_hidden=5, disc_hidden=4, context_dim=3)
TOY = ModelConfig(enc_hidden=4, gen_hidden=4, disc_hidden=4, context_dim=3, n_obs=3, n_future=2)


def zeroed(params, prefixes):
    return params.replace({n: np.zeros_like(a) for n, a in params.tensors.items() if n.startswith(prefixes)})


def dec_dense_prefixes():
    return tuple(f"gen.{s}.decoder.dense" for s in SEGMENTS)


@pytest.fixture(scope="module")
def small_params():
    return init_params(SMALL, 3)


@pytest.fixture(scope="module")
def windows():
    rng = np.random.default_rng(0)
    return rng.normal(size=(100, 78, 2)), rng.normal(size=(100, 78, 2))


# parameters


def test_parameter_names_and_shapes():
    p = init_params(ModelConfig(), 0)
    assert p["encoder.lstm.w_ih"].shape == (156, 512)
    assert p["encoder.dense.w"].shape == (128, 64)
    assert p["gen.face.decoder.lstm.w_hh"].shape == (128, 512)
    assert p["gen.hands.decoder.lstm.w_ih"].shape == (80 + 64, 512)
    assert p["gen.body.decoder.dense.w"].shape == (128, 20)
    assert p["disc.dense.b"].shape == (1,)
    assert set(p.discriminator_names()) == {n for n in p if n.startswith("disc.")}
    assert not set(p.discriminator_names()) & set(p.generator_names())


def test_init_is_seeded():
    assert init_params(SMALL, 1).equal(init_params(SMALL, 1))
    assert not init_params(SMALL, 1).equal(init_params(SMALL, 2))


# encoder


def test_encoder_zero_propagation(small_params):
    p = zeroed(small_params, ("encoder",))
    assert np.array_equal(encode_partner(np.zeros((100, 78, 2)), p), np.zeros(3))
    bias = np.array([0.5, -1.0, 2.0])
    p = p.replace({"encoder.dense.b": bias})
    assert np.array_equal(encode_partner(np.zeros((100, 78, 2)), p), bias)


def test_encoder_is_order_sensitive():
    cfg = ModelConfig(enc_hidden=4, gen_hidden=4, disc_hidden=4, context_dim=3, n_obs=4, n_future=2)
    p = init_params(cfg, 0)
    frames = np.random.default_rng(1).normal(size=(4, 78, 2))
    c = encode_partner(frames, p)
    assert not np.allclose(c, encode_partner(frames[[2, 0, 3, 1]], p))


@pytest.mark.parametrize("C", [8, 64])
def test_context_length(C, windows):
    p = init_params(ModelConfig(enc_hidden=4, gen_hidden=4, disc_hidden=4, context_dim=C), 0)
    assert encode_partner(windows[1], p).shape == (C,)


def test_encoder_rejects_wrong_length(small_params):
    with pytest.raises(DimensionError):
        encode_partner(np.zeros((99, 78, 2)), small_params)


# generators


@pytest.mark.parametrize("segment", SEGMENTS)
def test_generate_segment_shapes_and_residual_identity(segment, small_params, windows):
    obs = getattr(split_segments(windows[0]), segment).reshape(100, -1)
    c = encode_partner(windows[1], small_params)
    out = generate_segment(obs, c, small_params, segment)
    assert out.shape == (50, SEGMENT_DIMS[segment])
    ident = generate_segment(obs, c, zeroed(small_params, dec_dense_prefixes()), segment)
    assert np.array_equal(ident, np.repeat(obs[-1:], 50, axis=0))


def test_forecast_shape_and_zero_model_is_baseline(small_params, windows):
    out = forecast(*windows, small_params)
    assert out.shape == (50, 78, 2)
    zero = zeroed(small_params, ("",))
    assert np.array_equal(forecast(*windows, zero), baseline_constant(windows[0]))


def test_forecast_segments_match_generators(small_params, windows):
    out = split_segments(forecast(*windows, small_params))
    c = encode_partner(windows[1], small_params)
    for seg in SEGMENTS:
        obs = getattr(split_segments(windows[0]), seg)
        assert np.array_equal(getattr(out, seg), generate_segment(obs, c, small_params, seg))


def test_last_observed_frame_drives_first_prediction(small_params, windows):
    target, partner = windows
    base = forecast(target, partner, small_params)
    moved = target.copy()
    moved[99, 30] += 0.1
    pert = forecast(moved, partner, small_params)
    assert not np.array_equal(base[0], pert[0])
    # the change keeps propagating through the autoregressive chain
    assert all(not np.array_equal(base[t], pert[t]) for t in range(50))


def test_partner_changes_forecast(small_params, windows):
    target, partner = windows
    assert not np.array_equal(forecast(target, partner, small_params), forecast(target, partner * 1.5, small_params))


def test_causality_truncated_rollout(small_params, windows):
    full = forecast(*windows, small_params)
    for k in (1, 7, 23):
        cfg = ModelConfig(**{**SMALL.to_dict(), "n_future": k})
        short = forecast(*windows, init_params(cfg, 0).replace(small_params.tensors))
        assert np.array_equal(short, full[:k])


def test_no_teacher_forcing_chain():
    # Reference rollout written from the decoder definition: each step is fed
    # the previous output, and injecting a change at step t moves only steps >= t.
    from dyadforecast.numkernel import lstm_cell
    from dyadforecast.model.params import lstm_view, dense_view

    p = init_params(SMALL, 4)
    rng = np.random.default_rng(2)
    obs = rng.normal(size=(100, 20))
    c = rng.normal(size=3)
    w = bind(p)
    out = generate_segment(obs, c, p, "body")

    def reference(inject_at=None):
        h = np.zeros(5)
        cs = np.zeros(5)
        enc = lstm_view(w, "gen.body.encoder")
        for x in obs:
            h, cs = (a.data for a in lstm_cell(x, h, cs, enc))
        dec, dn = lstm_view(w, "gen.body.decoder"), dense_view(w, "gen.body.decoder")
        prev, frames = obs[-1], []
        for t in range(50):
            h, cs = (a.data for a in lstm_cell(np.concatenate([prev, c]), h, cs, dec))
            prev = prev + h @ dn.w.data + dn.b.data
            if t == inject_at:
                prev = prev + 0.05
            frames.append(prev)
        return np.array(frames)

    assert np.allclose(reference(), out, rtol=0, atol=1e-12)
    injected = reference(inject_at=20)
    assert np.array_equal(injected[:20], reference()[:20])
    assert all(not np.allclose(injected[t], out[t], rtol=0, atol=1e-9) for t in range(20, 50))


# discriminator


def test_discriminate_zero_weights(small_params):
    p = zeroed(small_params, ("disc",))
    assert discriminate(np.random.default_rng(0).normal(size=(50, 78, 2)), p) == 0.5


def test_discriminate_range_and_determinism(small_params):
    rng = np.random.default_rng(1)
    for _ in range(5):
        motion = rng.normal(scale=3.0, size=(50, 78, 2))
        d = discriminate(motion, small_params)
        assert 0.0 < d < 1.0
        assert d == discriminate(motion.copy(), small_params)


def test_discriminate_batch_matches_single(small_params):
    motion = np.random.default_rng(2).normal(size=(3, 50, 78, 2))
    batch = discriminate(motion, small_params)
    assert batch.shape == (3,)
    assert np.allclose(batch, [discriminate(m, small_params) for m in motion], rtol=0, atol=1e-15)


# losses


def _segments(value):
    return {s: np.full((2, 50, SEGMENT_DIMS[s]), value) for s in SEGMENTS}


def test_generator_loss_zero_error():
    assert float(generator_loss(_segments(0.3), _segments(0.3), np.array([0.5]), LossWeights(), False).data) == 0.0


def test_generator_loss_hand_value():
    pred, truth = _segments(0.1), _segments(0.0)  # MSE 0.01 per segment
    loss = float(generator_loss(pred, truth, np.array([0.5, 0.5]), LossWeights(), True).data)
    assert loss == pytest.approx(0.3 + math.log(0.5), abs=1e-6)
    assert loss == pytest.approx(-0.393147, abs=1e-6)


def test_generator_loss_clamp_limit():
    loss = float(generator_loss(_segments(0.0), _segments(0.0), np.array([1.0]), LossWeights(), True).data)
    assert loss == pytest.approx(math.log(PROB_EPS), rel=1e-6)
    assert math.isfinite(loss)


def test_generator_terms_adv_zero_during_warmup():
    terms = generator_loss_terms(_segments(0.1), _segments(0.0), np.array([0.9]), LossWeights(), False)
    assert float(terms["adv"].data) == 0.0
    assert float(terms["total"].data) == pytest.approx(0.3, abs=1e-12)


def test_generator_loss_weights():
    w = LossWeights(alpha1=1.0, alpha2=2.0, alpha3=3.0, beta=0.0)
    pred = {"face": np.full((1, 2), 1.0), "body": np.full((1, 2), 2.0), "hands": np.full((1, 2), 3.0)}
    truth = {s: np.zeros((1, 2)) for s in SEGMENTS}
    assert float(generator_loss(pred, truth, np.array([0.5]), w, True).data) == 1 + 2 * 4 + 3 * 9


def test_discriminator_loss_values():
    assert float(discriminator_loss(np.array([0.5]), np.array([0.5])).data) == pytest.approx(1.386294, abs=1e-6)
    assert float(discriminator_loss(np.array([0.5]), np.array([0.5])).data) == pytest.approx(2 * math.log(2), abs=1e-12)
    perfect = float(discriminator_loss(np.array([1 - PROB_EPS]), np.array([PROB_EPS])).data)
    assert perfect == pytest.approx(2 * PROB_EPS, rel=1e-6)
    fooled = float(discriminator_loss(np.array([PROB_EPS]), np.array([1 - PROB_EPS])).data)
    assert fooled == pytest.approx(-2 * math.log(PROB_EPS), rel=1e-6)


@pytest.mark.parametrize("bad", [np.array([1.2]), np.array([-0.1]), np.array([np.nan])])
def test_losses_reject_non_probabilities(bad):
    with pytest.raises(ContractError):
        discriminator_loss(bad, np.array([0.5]))
    with pytest.raises(ContractError):
        generator_loss(_segments(0.0), _segments(0.0), bad, LossWeights(), True)


def test_loss_weights_must_be_non_negative():
    with pytest.raises(ContractError):
        LossWeights(beta=-1.0)


# gradient flow between the two players


def _toy_batch(seed=0, batch=2):
    rng = np.random.default_rng(seed)
    tgt = rng.normal(size=(TOY.n_obs, batch, 156))
    par = rng.normal(size=(TOY.n_obs, batch, 156))
    fut = rng.normal(size=(TOY.n_future, batch, 156))
    return tgt, par, fut


def test_discriminator_loss_touches_only_discriminator():
    p = init_params(TOY, 0)
    tgt, par, fut = _toy_batch()
    w = bind(p, trainable=list(p))
    fake = forecast_tm(Tensor(tgt), Tensor(par), w, TOY.n_future)[0].detach()
    loss = discriminator_loss(discriminate_tm(Tensor(fut), w), discriminate_tm(fake, w))
    grads = dict(zip(p, backward(loss, wrt=[w[n] for n in p])))
    assert all(not grads[n].any() for n in p.generator_names())
    assert all(grads[n].any() for n in p.discriminator_names())


def test_generator_loss_reaches_encoder_and_generators():
    p = init_params(TOY, 0)
    tgt, par, fut = _toy_batch()
    w = bind(p, trainable=p.generator_names())
    merged, segs = forecast_tm(Tensor(tgt), Tensor(par), w, TOY.n_future)
    truth = {s: fut[:, :, segment_columns(s)] for s in SEGMENTS}
    loss = generator_loss(segs, truth, discriminate_tm(merged, w), LossWeights(), True)
    names = p.generator_names()
    grads = dict(zip(names, backward(loss, wrt=[w[n] for n in names])))
    assert all(grads[n].any() for n in names)
    assert all(w[n].grad is None for n in p.discriminator_names())


def test_adversarial_step_raises_d_fake():
    # frozen random discriminator; one plain gradient step on the beta term alone
    for seed in range(5):
        p = init_params(TOY, seed)
        tgt, par, _ = _toy_batch(seed, batch=4)
        names = p.generator_names()

        def d_fake(params, trainable=()):
            w = bind(params, trainable)
            merged, _ = forecast_tm(Tensor(tgt), Tensor(par), w, TOY.n_future)
            return discriminate_tm(merged, w), w

        probs, w = d_fake(p, names)
        adv = generator_loss_terms(
            {s: np.zeros(1) for s in SEGMENTS}, {s: np.zeros(1) for s in SEGMENTS}, probs,
            LossWeights(alpha1=0, alpha2=0, alpha3=0), True,
        )["total"]
        grads = backward(adv, wrt=[w[n] for n in names])
        stepped = p.replace({n: p[n] - 1e-2 * g for n, g in zip(names, grads)})
        before = float(mean(probs).data)
        after = float(mean(d_fake(stepped)[0]).data)
        assert after >= before, (seed, before, after)
        assert stepped.equal(p, p.discriminator_names())


# checkpoints


def _opt_states(p):
    g = AdamState.zeros_like(p.subset(p.generator_names()))
    g.step = 7
    g.m = {k: v + 0.1 for k, v in g.m.items()}
    return {"generator": g, "discriminator": AdamState.zeros_like(p.subset(p.discriminator_names()))}


def test_checkpoint_round_trip(tmp_path, small_params):
    path = tmp_path / "c.npz"
    states = _opt_states(small_params)
    save_checkpoint(path, small_params, states, meta={"seed": 3, "note": "x"})
    ck = load_checkpoint(path)
    assert ck.params.config == SMALL
    assert ck.params.equal(small_params) and set(ck.params) == set(small_params)
    assert ck.meta == {"seed": 3, "note": "x"}
    g = ck.opt_states["generator"]
    assert g.step == 7 and all(np.array_equal(g.m[k], states["generator"].m[k]) for k in g.m)


@pytest.mark.parametrize("keep", [0.1, 0.5, 0.95])
def test_truncated_checkpoint(tmp_path, small_params, keep):
    path = tmp_path / "c.npz"
    save_checkpoint(path, small_params)
    data = path.read_bytes()
    path.write_bytes(data[: int(len(data) * keep)])
    with pytest.raises(CorruptCheckpointError):
        load_checkpoint(path)


def test_tampered_checkpoint(tmp_path, small_params):
    path = tmp_path / "c.npz"
    arrays = dict(small_params.tensors)
    arrays["disc.dense.b"] = arrays["disc.dense.b"] + 1.0
    save_checkpoint(path, small_params)
    # rewrite one array while keeping the old digest
    with np.load(path) as z:
        stored = {k: z[k] for k in z.files}
    stored["param/disc.dense.b"] = arrays["disc.dense.b"]
    np.savez(path, **stored)
    with pytest.raises(CorruptCheckpointError):
        load_checkpoint(path)


def test_checkpoint_version_mismatch(tmp_path, small_params, monkeypatch):
    path = tmp_path / "c.npz"
    monkeypatch.setattr(ckpt_mod, "VERSION", 99)
    save_checkpoint(path, small_params)
    monkeypatch.setattr(ckpt_mod, "VERSION", 1)
    with pytest.raises(CheckpointVersionError):
        load_checkpoint(path)


def test_missing_checkpoint(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_checkpoint(tmp_path / "nope.npz")
