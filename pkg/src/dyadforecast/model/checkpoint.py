"""Checkpoint container.

A checkpoint is a numpy ``.npz`` archive.  Parameter arrays are stored
under ``param/<name>`` and optimizer moments under
``opt/<group>/{m,v}/<name>``; everything else (format version, model
config, run config, seed, RNG state, history) lives in a JSON document
under ``__meta__``, together with a SHA-256 digest of all arrays.
"""
import hashlib
import json
import os
import tempfile
import zipfile
from dataclasses import dataclass, field

import numpy as np

from ..errors import CheckpointVersionError, CorruptCheckpointError
from ..numkernel import AdamState
from .params import ModelConfig, ModelParams

FORMAT = "dyadforecast-checkpoint"
VERSION = 1


@dataclass
class Checkpoint:
    params: ModelParams
    opt_states: dict = field(default_factory=dict)  # group -> AdamState
    meta: dict = field(default_factory=dict)


def _digest(arrays):
    h = hashlib.sha256()
    for key in sorted(arrays):
        a = np.ascontiguousarray(arrays[key])
        h.update(key.encode())
        h.update(str(a.dtype).encode())
        h.update(repr(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()


def save_checkpoint(path, params, opt_states=None, meta=None):
    arrays = {f"param/{n}": a for n, a in params.tensors.items()}
    opt_meta = {}
    for group, st in (opt_states or {}).items():
        opt_meta[group] = {"step": st.step, "beta1": st.beta1, "beta2": st.beta2, "eps": st.eps}
        for n, a in st.m.items():
            arrays[f"opt/{group}/m/{n}"] = a
        for n, a in st.v.items():
            arrays[f"opt/{group}/v/{n}"] = a
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "model_config": params.config.to_dict(),
        "optimizers": opt_meta,
        "digest": _digest(arrays),
        "meta": meta or {},
    }
    arrays["__meta__"] = np.frombuffer(json.dumps(doc).encode("utf-8"), dtype=np.uint8)
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            np.savez(fh, **arrays)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path):
    """Read a checkpoint; any damage raises :class:`CorruptCheckpointError`."""
    try:
        with np.load(path, allow_pickle=False) as z:
            arrays = {k: z[k] for k in z.files}
    except FileNotFoundError:
        raise
    except (zipfile.BadZipFile, ValueError, OSError, EOFError, KeyError) as exc:
        raise CorruptCheckpointError(f"{path}: unreadable checkpoint ({exc})") from None
    if "__meta__" not in arrays:
        raise CorruptCheckpointError(f"{path}: metadata block missing")
    try:
        doc = json.loads(arrays.pop("__meta__").tobytes().decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptCheckpointError(f"{path}: bad metadata ({exc})") from None
    if doc.get("format") != FORMAT:
        raise CorruptCheckpointError(f"{path}: not a {FORMAT} file")
    if doc.get("version") != VERSION:
        raise CheckpointVersionError(f"{path}: checkpoint version {doc.get('version')}, expected {VERSION}")
    if _digest(arrays) != doc.get("digest"):
        raise CorruptCheckpointError(f"{path}: array digest mismatch")

    config = ModelConfig.from_dict(doc["model_config"])
    tensors = {k[len("param/"):]: a for k, a in arrays.items() if k.startswith("param/")}
    try:
        params = ModelParams(config, tensors)
    except Exception as exc:
        raise CorruptCheckpointError(f"{path}: {exc}") from None
    opt_states = {}
    for group, om in doc.get("optimizers", {}).items():
        m = {k.split("/", 3)[3]: a for k, a in arrays.items() if k.startswith(f"opt/{group}/m/")}
        v = {k.split("/", 3)[3]: a for k, a in arrays.items() if k.startswith(f"opt/{group}/v/")}
        opt_states[group] = AdamState(m, v, int(om["step"]), om["beta1"], om["beta2"], om["eps"])
    return Checkpoint(params, opt_states, doc.get("meta", {}))
