"""Network sizes and the flat, named parameter store."""
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ContractError
from ..motiondata.layout import FRAME_DIM, FUT_LEN, OBS_LEN, SEGMENT_DIMS, SEGMENTS
from ..numkernel import DenseParams, LstmCellParams, Tensor, init_dense, init_lstm


@dataclass(frozen=True)
class ModelConfig:
    enc_hidden: int = 128
    gen_hidden: int = 128
    disc_hidden: int = 128
    context_dim: int = 64
    n_obs: int = OBS_LEN
    n_future: int = FUT_LEN

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: int(v) for k, v in d.items() if k in cls.__dataclass_fields__})


def _lstm_names(prefix):
    return [f"{prefix}.lstm.w_ih", f"{prefix}.lstm.w_hh", f"{prefix}.lstm.b"]


def _dense_names(prefix):
    return [f"{prefix}.dense.w", f"{prefix}.dense.b"]


def generator_prefix(segment):
    return f"gen.{segment}"


class ModelParams:
    """Every trainable array, keyed ``encoder.lstm.w_ih``, ``gen.face.decoder.lstm.w_hh``, ``disc.dense.b``...

    Arrays are treated as immutable: optimizers build a new instance.
    """

    def __init__(self, config, tensors):
        self.config = config
        self.tensors = dict(tensors)
        missing = [n for n in self.expected_names(config) if n not in self.tensors]
        if missing:
            raise ContractError(f"missing parameters: {missing}")

    @staticmethod
    def expected_names(config=None):
        names = _lstm_names("encoder") + _dense_names("encoder")
        for seg in SEGMENTS:
            p = generator_prefix(seg)
            names += _lstm_names(f"{p}.encoder") + _lstm_names(f"{p}.decoder") + _dense_names(f"{p}.decoder")
        names += _lstm_names("disc") + _dense_names("disc")
        return names

    def generator_names(self):
        """Encoder + three generators: everything trained by the generator loss."""
        return [n for n in self.tensors if not n.startswith("disc.")]

    def discriminator_names(self):
        return [n for n in self.tensors if n.startswith("disc.")]

    def subset(self, names):
        return {n: self.tensors[n] for n in names}

    def replace(self, updates):
        merged = dict(self.tensors)
        merged.update(updates)
        return ModelParams(self.config, merged)

    def copy(self):
        return ModelParams(self.config, {k: v.copy() for k, v in self.tensors.items()})

    def equal(self, other, names=None):
        names = self.tensors if names is None else names
        return all(np.array_equal(self.tensors[n], other.tensors[n]) for n in names)

    def n_parameters(self):
        return int(sum(v.size for v in self.tensors.values()))

    def __iter__(self):
        return iter(self.tensors)

    def __getitem__(self, name):
        return self.tensors[name]


def init_params(config, seed):
    """Seeded uniform initialisation; the draw order is fixed by ``expected_names``."""
    rng = np.random.default_rng(seed)
    t = {}

    def put_lstm(prefix, d_in, h):
        p = init_lstm(rng, d_in, h)
        t[f"{prefix}.lstm.w_ih"], t[f"{prefix}.lstm.w_hh"], t[f"{prefix}.lstm.b"] = p.w_ih, p.w_hh, p.b

    def put_dense(prefix, d_in, d_out):
        p = init_dense(rng, d_in, d_out)
        t[f"{prefix}.dense.w"], t[f"{prefix}.dense.b"] = p.w, p.b

    put_lstm("encoder", FRAME_DIM, config.enc_hidden)
    put_dense("encoder", config.enc_hidden, config.context_dim)
    for seg in SEGMENTS:
        p = generator_prefix(seg)
        d = SEGMENT_DIMS[seg]
        put_lstm(f"{p}.encoder", d, config.gen_hidden)
        put_lstm(f"{p}.decoder", d + config.context_dim, config.gen_hidden)
        put_dense(f"{p}.decoder", config.gen_hidden, d)
    put_lstm("disc", FRAME_DIM, config.disc_hidden)
    put_dense("disc", config.disc_hidden, 1)
    return ModelParams(config, t)


def bind(params, trainable=()):
    """Wrap arrays as tensor leaves; names in ``trainable`` record gradients."""
    trainable = set(trainable)
    return {n: Tensor(a, requires_grad=n in trainable, name=n) for n, a in params.tensors.items()}


def lstm_view(w, prefix):
    return LstmCellParams(w[f"{prefix}.lstm.w_ih"], w[f"{prefix}.lstm.w_hh"], w[f"{prefix}.lstm.b"])


def dense_view(w, prefix):
    return DenseParams(w[f"{prefix}.dense.w"], w[f"{prefix}.dense.b"])
