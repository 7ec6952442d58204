"""Fixed-length motion sequences, padding and mean/std normalization."""
from dataclasses import dataclass, replace

import math

import numpy as np

from ..errors import ContractError, DataError
from .layout import N_LANDMARKS, OBS_LEN, SEQ_LEN, as_frame

NORM_EPS = 1e-8


def _freeze(arr):
    arr = np.array(arr, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MotionSequence:
    """150 frames of one person plus the statistics needed to undo normalization.

    ``mu`` and ``sigma`` hold one scalar per axis (x, y).  Frames at index
    ``>= valid_count`` repeat the last real frame.
    """

    frames: np.ndarray
    valid_count: int
    mu: np.ndarray = None
    sigma: np.ndarray = None
    normalized: bool = False

    def __post_init__(self):
        frames = _freeze(self.frames)
        if frames.shape != (SEQ_LEN, N_LANDMARKS, 2):
            raise DataError(f"sequence must have shape ({SEQ_LEN}, {N_LANDMARKS}, 2), got {frames.shape}")
        if not 1 <= self.valid_count <= SEQ_LEN:
            raise DataError(f"valid_count must be in [1, {SEQ_LEN}], got {self.valid_count}")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "valid_count", int(self.valid_count))
        if self.mu is not None:
            object.__setattr__(self, "mu", _freeze(self.mu))
        if self.sigma is not None:
            sigma = _freeze(self.sigma)
            if np.any(sigma < 0):
                raise DataError("sigma must be non-negative")
            object.__setattr__(self, "sigma", sigma)

    def __eq__(self, other):
        if not isinstance(other, MotionSequence):
            return NotImplemented
        same_stats = all(
            (a is None and b is None) or (a is not None and b is not None and np.array_equal(a, b))
            for a, b in ((self.mu, other.mu), (self.sigma, other.sigma))
        )
        return (
            self.valid_count == other.valid_count
            and self.normalized == other.normalized
            and np.array_equal(self.frames, other.frames)
            and same_stats
        )

    @property
    def observed(self):
        return self.frames[:OBS_LEN]

    @property
    def future(self):
        return self.frames[OBS_LEN:]


@dataclass(frozen=True)
class DyadSample:
    """Target person to forecast and the interacting partner conditioning it."""

    target: MotionSequence
    partner: MotionSequence
    k: int = OBS_LEN

    def __post_init__(self):
        if self.k != OBS_LEN:
            raise DataError(f"split index is fixed at {OBS_LEN}, got {self.k}")

    @property
    def normalized(self):
        return self.target.normalized and self.partner.normalized


def pad_sequence(frames, target_len=SEQ_LEN):
    """Repeat the last frame up to ``target_len``; records the original length."""
    if target_len != SEQ_LEN:
        raise DataError(f"sequences are fixed at {SEQ_LEN} frames")
    if len(frames) == 0:
        raise DataError("cannot pad an empty sequence")
    if len(frames) > target_len:
        raise DataError(f"sequence has {len(frames)} frames, more than {target_len}")
    arr = np.stack([as_frame(f) for f in frames])
    n = len(arr)
    if n < target_len:
        arr = np.concatenate([arr, np.repeat(arr[-1:], target_len - n, axis=0)])
    return MotionSequence(arr, n)


def sequence_stats(frames):
    """Per-axis mean and population std over all frames and landmarks."""
    pts = np.asarray(frames, dtype=np.float64).reshape(-1, 2)
    n = len(pts)
    # exactly rounded sums; clipping to [min, max] keeps a constant axis's mean
    # equal to that constant, so its spread is exactly zero
    mu = np.array([math.fsum(pts[:, a]) / n for a in range(2)])
    mu = np.clip(mu, pts.min(axis=0), pts.max(axis=0))
    dev = pts - mu
    sigma = np.sqrt([math.fsum(dev[:, a] * dev[:, a]) / n for a in range(2)])
    return mu, sigma


def normalize_array(frames, mu, sigma):
    return (np.asarray(frames, dtype=np.float64) - mu) / (sigma + NORM_EPS)


def denormalize_array(frames, mu, sigma):
    return np.asarray(frames, dtype=np.float64) * (sigma + NORM_EPS) + mu


def normalize_sequence(seq, window=None):
    """Normalize with statistics of the valid frames.

    ``window`` restricts the statistics to the first ``window`` frames
    (forecast time only sees the observed 100).
    """
    if seq.normalized:
        raise ContractError("sequence is already normalized")
    n = seq.valid_count if window is None else min(window, seq.valid_count)
    mu, sigma = sequence_stats(seq.frames[:n])
    return MotionSequence(normalize_array(seq.frames, mu, sigma), seq.valid_count, mu, sigma, True)


def denormalize(seq):
    if not seq.normalized or seq.mu is None or seq.sigma is None:
        raise ContractError("denormalize needs a normalized sequence with stored mu/sigma")
    return MotionSequence(denormalize_array(seq.frames, seq.mu, seq.sigma), seq.valid_count)


def normalize_sample(sample, window=None):
    return replace(
        sample,
        target=normalize_sequence(sample.target, window),
        partner=normalize_sequence(sample.partner, window),
    )


def raw_sample(sample):
    """Undo normalization on both people (no-op for raw samples)."""
    if not sample.target.normalized and not sample.partner.normalized:
        return sample
    return replace(
        sample,
        target=denormalize(sample.target) if sample.target.normalized else sample.target,
        partner=denormalize(sample.partner) if sample.partner.normalized else sample.partner,
    )


def training_view(samples):
    """Normalize every sample over its full valid range, as done for training data."""
    return [s if s.normalized else normalize_sample(s) for s in samples]


def inference_view(samples):
    """Normalize with observed-window statistics only (no future frames at forecast time)."""
    return [normalize_sample(raw_sample(s), window=OBS_LEN) for s in samples]
