"""Adversarial training loop with MSE-only warm-up.

Per batch: one discriminator update on real vs generated futures (the
generated frames enter as constants), then one update of the partner
encoder and the three generators against the frozen discriminator.
Before ``warmup_epochs`` the adversarial term is off and the
discriminator is not updated at all.
"""
import csv
import os
import sys
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .errors import ContractError, DataError, TrainingError
from .model import (
    LossWeights, ModelConfig, bind, discriminate_tm, discriminator_loss, forecast_tm,
    generator_loss_terms, init_params, load_checkpoint, save_checkpoint,
)
from .motiondata.layout import FUT_LEN, OBS_LEN, SEGMENTS, flatten_frames, segment_columns
from .numkernel import AdamState, Tensor, adam_step, backward, clip_by_global_norm


@dataclass
class TrainConfig:
    batch_size: int = 1024
    epochs: int = 1000
    lr: float = 5e-4
    warmup_epochs: int = 50
    alpha1: float = 10.0
    alpha2: float = 10.0
    alpha3: float = 10.0
    beta: float = 1.0
    enc_hidden: int = 128
    gen_hidden: int = 128
    disc_hidden: int = 128
    context_dim: int = 64
    seed: int = 0
    clip_norm: float = 5.0
    checkpoint_every: int = 0
    non_saturating: bool = False
    deterministic: bool = True
    data: str = ""

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.batch_size < 1:
            raise ContractError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ContractError("epochs must be >= 0")
        if not self.lr > 0:
            raise ContractError("lr must be > 0")
        if not 0 <= self.warmup_epochs <= self.epochs:
            raise ContractError("warmup_epochs must lie in [0, epochs]")

    @property
    def weights(self):
        return LossWeights(self.alpha1, self.alpha2, self.alpha3, self.beta)

    @property
    def model_config(self):
        return ModelConfig(self.enc_hidden, self.gen_hidden, self.disc_hidden, self.context_dim, OBS_LEN, FUT_LEN)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        kinds = {f.name: f.type for f in fields(cls)}
        out = {}
        for k, v in d.items():
            if k not in kinds:
                raise ContractError(f"unknown training option {k!r}")
            out[k] = _coerce(v, kinds[k])
        return cls(**out)


def _coerce(value, kind):
    kind = kind if isinstance(kind, str) else kind.__name__
    if kind == "bool":
        if isinstance(value, str):
            return value.strip().lower() in ("1", "true", "yes", "on")
        return bool(value)
    if kind == "int":
        return int(value)
    if kind == "float":
        return float(value)
    return str(value)


PRESETS = {
    "full": {},
    "desk": {
        "batch_size": 16, "epochs": 500, "warmup_epochs": 300,
        "enc_hidden": 32, "gen_hidden": 32, "disc_hidden": 32, "context_dim": 16,
        # far fewer optimizer steps than the full schedule, so a larger step size
        "lr": 2e-3,
    },
}


def preset(name, **overrides):
    if name not in PRESETS:
        raise ContractError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return TrainConfig(**{**PRESETS[name], **overrides})


# ----------------------------------------------------------------------------
# history

HISTORY_FIELDS = ("epoch", "mse_face", "mse_body", "mse_hands", "adv_g", "loss_d", "d_real", "d_fake", "seconds")


@dataclass
class EpochRecord:
    epoch: int
    mse_face: float
    mse_body: float
    mse_hands: float
    adv_g: float
    loss_d: float
    d_real: float
    d_fake: float
    seconds: float

    def numeric(self):
        """Everything but wall-clock time (the reproducible part)."""
        return tuple(getattr(self, f) for f in HISTORY_FIELDS if f != "seconds")


@dataclass
class TrainHistory:
    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def numeric_rows(self):
        return [r.numeric() for r in self.records]

    def to_rows(self):
        return [asdict(r) for r in self.records]

    @classmethod
    def from_rows(cls, rows):
        return cls([EpochRecord(**{k: (int(v) if k == "epoch" else float(v)) for k, v in r.items()}) for r in rows])

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(HISTORY_FIELDS)
            for r in self.records:
                w.writerow([r.epoch] + [repr(float(getattr(r, f))) for f in HISTORY_FIELDS[1:]])

    @classmethod
    def read_csv(cls, path):
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != HISTORY_FIELDS:
                raise DataError(f"{path}: unexpected history header {reader.fieldnames}")
            return cls.from_rows(list(reader))


# ----------------------------------------------------------------------------
# state


@dataclass
class TrainState:
    params: object
    g_opt: AdamState
    d_opt: AdamState
    rng: np.random.Generator
    epoch: int = 0
    history: TrainHistory = field(default_factory=TrainHistory)

    @property
    def opt_states(self):
        return {"generator": self.g_opt, "discriminator": self.d_opt}


def init_state(config):
    params = init_params(config.model_config, config.seed)
    return TrainState(
        params=params,
        g_opt=AdamState.zeros_like(params.subset(params.generator_names())),
        d_opt=AdamState.zeros_like(params.subset(params.discriminator_names())),
        rng=np.random.default_rng([config.seed, 1]),
    )


def save_training_state(path, state, config):
    meta = {
        "train_config": config.to_dict(),
        "seed": config.seed,
        "epoch": state.epoch,
        "rng_state": state.rng.bit_generator.state,
        "history": state.history.to_rows(),
    }
    save_checkpoint(path, state.params, state.opt_states, meta)


def load_training_state(path):
    """Returns ``(state, config)`` from a checkpoint written by :func:`save_training_state`."""
    ckpt = load_checkpoint(path)
    meta = ckpt.meta
    config = TrainConfig.from_dict(meta["train_config"]) if "train_config" in meta else None
    rng = np.random.default_rng()
    if "rng_state" in meta:
        rng.bit_generator.state = meta["rng_state"]
    state = TrainState(
        params=ckpt.params,
        g_opt=ckpt.opt_states.get("generator") or AdamState.zeros_like(ckpt.params.subset(ckpt.params.generator_names())),
        d_opt=ckpt.opt_states.get("discriminator") or AdamState.zeros_like(ckpt.params.subset(ckpt.params.discriminator_names())),
        rng=rng,
        epoch=int(meta.get("epoch", 0)),
        history=TrainHistory.from_rows(meta.get("history", [])),
    )
    return state, config


# ----------------------------------------------------------------------------
# data


@dataclass
class DatasetArrays:
    """Flattened (N, T, 156) views of normalized samples."""

    target_obs: np.ndarray
    partner_obs: np.ndarray
    target_future: np.ndarray

    def __len__(self):
        return len(self.target_obs)

    @classmethod
    def from_samples(cls, samples):
        if not samples:
            raise DataError("dataset is empty")
        if not all(s.normalized for s in samples):
            raise ContractError("training samples must be normalized (see motiondata.training_view)")
        tgt = flatten_frames(np.stack([s.target.frames for s in samples]))
        par = flatten_frames(np.stack([s.partner.frames for s in samples]))
        return cls(tgt[:, :OBS_LEN], par[:, :OBS_LEN], tgt[:, OBS_LEN:])

    def batch(self, idx):
        tm = lambda a: np.ascontiguousarray(np.swapaxes(a[idx], 0, 1))  # noqa: E731
        return tm(self.target_obs), tm(self.partner_obs), tm(self.target_future)


# ----------------------------------------------------------------------------
# steps


def _apply(params, names, grads, opt, lr, clip_norm):
    grads, norm = clip_by_global_norm(dict(zip(names, grads)), clip_norm)
    new, opt = adam_step(params.subset(names), grads, opt, lr)
    return params.replace(new), opt, norm


def train_step(batch, state, epoch, config):
    """One discriminator update (after warm-up) then one generator update.

    ``batch`` is ``(target_obs, partner_obs, target_future)`` in time-major
    flattened layout.  Mutates ``state`` and returns a dict of batch losses.
    """
    tgt_obs, par_obs, fut = batch
    adversarial = epoch >= config.warmup_epochs
    params = state.params
    steps = params.config.n_future
    g_names = params.generator_names()
    d_names = params.discriminator_names()

    w = bind(params, trainable=g_names)
    merged, segs = forecast_tm(Tensor(tgt_obs), Tensor(par_obs), w, steps)
    if not np.all(np.isfinite(merged.data)):
        raise TrainingError("non-finite forecast")
    fake = Tensor(merged.data)
    real = Tensor(fut)

    wd = bind(params, trainable=d_names if adversarial else ())
    d_real = discriminate_tm(real, wd)
    d_fake = discriminate_tm(fake, wd)
    loss_d = discriminator_loss(d_real, d_fake)
    if not np.isfinite(loss_d.data):
        raise TrainingError("non-finite discriminator loss")
    if adversarial:
        grads = backward(loss_d, wrt=[wd[n] for n in d_names])
        state.params, state.d_opt, _ = _apply(state.params, d_names, grads, state.d_opt, config.lr, config.clip_norm)

    truth = {seg: fut[:, :, segment_columns(seg)] for seg in SEGMENTS}
    d_fake_g = None
    if adversarial:
        frozen = {n: Tensor(state.params.tensors[n]) for n in d_names}
        d_fake_g = discriminate_tm(merged, {**w, **frozen})
    terms = generator_loss_terms(segs, truth, d_fake_g, config.weights, adversarial, config.non_saturating)
    if not np.isfinite(terms["total"].data):
        raise TrainingError("non-finite generator loss")
    grads = backward(terms["total"], wrt=[w[n] for n in g_names])
    state.params, state.g_opt, _ = _apply(state.params, g_names, grads, state.g_opt, config.lr, config.clip_norm)

    return {
        "mse_face": float(terms["face"].data),
        "mse_body": float(terms["body"].data),
        "mse_hands": float(terms["hands"].data),
        "adv_g": float(terms["adv"].data),
        "loss_d": float(loss_d.data),
        "d_real": float(d_real.data.mean()),
        "d_fake": float(d_fake.data.mean()),
    }


def run_epoch(data, state, config):
    epoch = state.epoch
    t0 = time.perf_counter()
    order = state.rng.permutation(len(data))
    sums = dict.fromkeys(HISTORY_FIELDS[1:-1], 0.0)
    for b, start in enumerate(range(0, len(order), config.batch_size)):
        idx = order[start:start + config.batch_size]
        try:
            losses = train_step(data.batch(idx), state, epoch, config)
        except TrainingError as exc:
            raise TrainingError(f"epoch {epoch}, batch {b}: {exc}", epoch=epoch, batch=b, param=exc.param) from None
        for k, v in losses.items():
            sums[k] += v * len(idx)
    n = len(order)
    rec = EpochRecord(epoch=epoch, seconds=time.perf_counter() - t0, **{k: v / n for k, v in sums.items()})
    state.history.records.append(rec)
    state.epoch = epoch + 1
    return rec


def train(config, dataset, state=None, out_dir=None, progress=None):
    """Train for ``config.epochs`` epochs (continuing from ``state`` if given).

    With ``out_dir`` set, writes ``checkpoint.npz`` every
    ``checkpoint_every`` epochs and at the end, plus ``history.csv``.
    On a numeric failure the last checkpoint on disk is left untouched.
    Returns ``(params, history)``.
    """
    config.validate()
    state = init_state(config) if state is None else state
    if state.epoch >= config.epochs:
        return state.params, state.history
    data = DatasetArrays.from_samples(dataset)
    progress = sys.stderr if progress is None else progress
    ckpt_path = os.path.join(out_dir, "checkpoint.npz") if out_dir else None
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    while state.epoch < config.epochs:
        rec = run_epoch(data, state, config)
        if progress:
            print(
                f"epoch {rec.epoch:4d}  mse f/b/h {rec.mse_face:.5f}/{rec.mse_body:.5f}/{rec.mse_hands:.5f}"
                f"  adv {rec.adv_g:+.4f}  loss_d {rec.loss_d:.4f}  {rec.seconds:.2f}s",
                file=progress,
            )
        if ckpt_path and config.checkpoint_every and state.epoch % config.checkpoint_every == 0:
            save_training_state(ckpt_path, state, config)
            state.history.write_csv(os.path.join(out_dir, "history.csv"))
    if out_dir:
        save_training_state(ckpt_path, state, config)
        state.history.write_csv(os.path.join(out_dir, "history.csv"))
    return state.params, state.history

