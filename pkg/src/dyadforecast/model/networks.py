"""Partner encoder, segment generators and discriminator.

Internal ``*_tm`` functions work on time-major batches ``(T, B, F)`` of
tensors and are what training differentiates through.  The public
wrappers take per-sample ``(T, 78, 2)`` arrays (or a leading batch axis)
and return numpy arrays.
"""
import numpy as np

from ..errors import DimensionError
from ..motiondata.layout import (
    N_LANDMARKS, SEGMENT_DIMS, SEGMENTS, flatten_frames, segment_columns, unflatten_frames,
)
from ..numkernel import Tensor, concat, dense, lstm_scan, reshape, residual_rollout, sigmoid, zeros_state
from .params import bind, dense_view, generator_prefix, lstm_view


def _last_state(x, w, prefix):
    """Scan ``x`` from a zero state; return final (h, c)."""
    T, B = x.shape[0], x.shape[1]
    H = w[f"{prefix}.lstm.w_hh"].shape[0]
    packed = lstm_scan(x, zeros_state(B, H), zeros_state(B, H), lstm_view(w, prefix))
    return packed[T - 1], packed[T]


def encode_tm(partner, w):
    h, _ = _last_state(partner, w, "encoder")
    return dense(h, dense_view(w, "encoder"))


def generate_tm(segment, observed, ctx, w, steps):
    p = generator_prefix(segment)
    h, c = _last_state(observed, w, f"{p}.encoder")
    prev0 = observed[observed.shape[0] - 1]
    return residual_rollout(
        prev0, ctx, h, c, lstm_view(w, f"{p}.decoder"), dense_view(w, f"{p}.decoder"), steps
    )


def discriminate_tm(motion, w):
    h, _ = _last_state(motion, w, "disc")
    logits = dense(h, dense_view(w, "disc"))
    return sigmoid(reshape(logits, (logits.shape[0],)))


def forecast_tm(target_obs, partner_obs, w, steps):
    """Returns ``(merged, per_segment)``; merged is (steps, B, 156)."""
    ctx = encode_tm(partner_obs, w)
    segs = {}
    for seg in SEGMENTS:
        cols = segment_columns(seg)
        segs[seg] = generate_tm(seg, target_obs[:, :, cols], ctx, w, steps)
    merged = concat([segs[s] for s in SEGMENTS], axis=2)
    return merged, segs


def to_time_major(frames):
    """(B, T, 78, 2) or (B, T, F) -> (T, B, F)."""
    arr = np.asarray(frames, dtype=np.float64)
    if arr.shape[-2:] == (N_LANDMARKS, 2):
        arr = flatten_frames(arr)
    return np.ascontiguousarray(np.swapaxes(arr, 0, 1))


def from_time_major(flat_tm):
    """(T, B, 156) -> (B, T, 78, 2)."""
    return unflatten_frames(np.swapaxes(np.asarray(flat_tm), 0, 1))


# ----------------------------------------------------------------------------
# per-sample / batched numpy API


def _batched(arr, frame_ndim):
    arr = np.asarray(arr, dtype=np.float64)
    single = arr.ndim == frame_ndim
    return (arr[None] if single else arr), single


def _check_frames(arr, n_frames, what):
    if arr.ndim != 4 or arr.shape[1:] != (n_frames, N_LANDMARKS, 2):
        raise DimensionError(f"{what}: expected ({n_frames}, {N_LANDMARKS}, 2) per sample, got {arr.shape}")


def encode_partner(p_ob, params):
    """Context vector(s) from the partner's observed window."""
    arr, single = _batched(p_ob, 3)
    _check_frames(arr, params.config.n_obs, "encode_partner")
    c = encode_tm(Tensor(to_time_major(arr)), bind(params)).data
    return c[0] if single else c


def generate_segment(observed, c, params, segment):
    """Forecast one segment from its observed window and the context vector.

    ``observed`` is (n_obs, d_seg) or (n_obs, n_landmarks, 2), optionally
    with a leading batch axis; the output uses the same layout.
    """
    d = SEGMENT_DIMS[segment]
    arr = np.asarray(observed, dtype=np.float64)
    as_points = arr.shape[-1] == 2
    if as_points:
        arr = arr.reshape(arr.shape[:-2] + (-1,))
    arr, single = _batched(arr, 2)
    c_arr, _ = _batched(c, 1)
    if arr.shape[1:] != (params.config.n_obs, d):
        raise DimensionError(f"generate_segment({segment}): expected ({params.config.n_obs}, {d}), got {arr.shape[1:]}")
    if c_arr.shape != (arr.shape[0], params.config.context_dim):
        raise DimensionError(f"generate_segment: context shape {c_arr.shape}")
    out = generate_tm(segment, Tensor(np.ascontiguousarray(np.swapaxes(arr, 0, 1))), Tensor(c_arr),
                      bind(params), params.config.n_future).data
    out = np.swapaxes(out, 0, 1)
    if as_points:
        out = out.reshape(out.shape[:-1] + (d // 2, 2))
    return out[0] if single else out


def forecast(p_fo_obs, p_ob_obs, params):
    """Predict the target's next ``n_future`` frames, shape (n_future, 78, 2) per sample."""
    target, single = _batched(p_fo_obs, 3)
    partner, _ = _batched(p_ob_obs, 3)
    _check_frames(target, params.config.n_obs, "forecast target")
    _check_frames(partner, params.config.n_obs, "forecast partner")
    if target.shape[0] != partner.shape[0]:
        raise DimensionError("forecast: target and partner batch sizes differ")
    merged, _ = forecast_tm(Tensor(to_time_major(target)), Tensor(to_time_major(partner)),
                            bind(params), params.config.n_future)
    out = from_time_major(merged.data)
    return out[0] if single else out


def discriminate(motion, params):
    """Probability that a future window is real."""
    arr, single = _batched(motion, 3)
    _check_frames(arr, params.config.n_future, "discriminate")
    p = discriminate_tm(Tensor(to_time_major(arr)), bind(params)).data
    return float(p[0]) if single else p


def forecast_flat_batch(target_obs_tm, partner_obs_tm, params):
    """Inference on time-major flattened arrays; returns (n_future, B, 156)."""
    merged, _ = forecast_tm(Tensor(target_obs_tm), Tensor(partner_obs_tm), bind(params), params.config.n_future)
    return merged.data

