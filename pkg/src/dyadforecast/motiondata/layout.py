"""Landmark layout and frame segmentation.

A frame is a (78, 2) float array: 28 face, 10 body, 20 left-hand and
20 right-hand points, in that order.
"""
from dataclasses import dataclass

import numpy as np

from ..errors import DataError

N_LANDMARKS = 78
N_FACE, N_BODY, N_LEFT_HAND, N_RIGHT_HAND = 28, 10, 20, 20

FACE = slice(0, 28)
BODY = slice(28, 38)
LEFT_HAND = slice(38, 58)
RIGHT_HAND = slice(58, 78)
HANDS = slice(38, 78)

SEGMENTS = ("face", "body", "hands")
SEGMENT_SLICES = {"face": FACE, "body": BODY, "hands": HANDS}
SEGMENT_LANDMARKS = {"face": 28, "body": 10, "hands": 40}
# flattened (x, y) feature widths fed to each generator
SEGMENT_DIMS = {name: 2 * n for name, n in SEGMENT_LANDMARKS.items()}
FRAME_DIM = 2 * N_LANDMARKS

SEQ_LEN = 150
OBS_LEN = 100
FUT_LEN = SEQ_LEN - OBS_LEN
FPS = 25


def as_frame(points):
    """Validate and return one frame as a float64 (78, 2) array."""
    arr = np.asarray(points, dtype=np.float64)
    if arr.shape != (N_LANDMARKS, 2):
        if arr.ndim == 2 and arr.shape[1] == 2:
            raise DataError(f"expected {N_LANDMARKS} landmarks, got {arr.shape[0]}")
        raise DataError(f"frame must have shape ({N_LANDMARKS}, 2), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DataError("frame contains non-finite coordinates")
    return arr


@dataclass(frozen=True)
class SegmentedFrame:
    face: np.ndarray
    body: np.ndarray
    hands: np.ndarray

    def merge(self):
        return np.concatenate([self.face, self.body, self.hands], axis=-2)


def split_segments(frame):
    """Split a frame, or any array whose second-to-last axis is 78, into face/body/hands."""
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim < 2 or frame.shape[-1] != 2:
        raise DataError(f"expected (..., {N_LANDMARKS}, 2), got {frame.shape}")
    if frame.shape[-2] != N_LANDMARKS:
        raise DataError(f"expected {N_LANDMARKS} landmarks, got {frame.shape[-2]}")
    return SegmentedFrame(
        frame[..., FACE, :].copy(), frame[..., BODY, :].copy(), frame[..., HANDS, :].copy()
    )


def merge_segments(face, body, hands):
    return SegmentedFrame(face, body, hands).merge()


def flatten_frames(frames):
    """(..., 78, 2) -> (..., 156) with x/y interleaved per landmark."""
    frames = np.asarray(frames)
    return frames.reshape(frames.shape[:-2] + (FRAME_DIM,))


def unflatten_frames(flat):
    flat = np.asarray(flat)
    return flat.reshape(flat.shape[:-1] + (N_LANDMARKS, 2))


def segment_columns(name):
    """Column range of a segment inside a flattened 156-wide frame."""
    s = SEGMENT_SLICES[name]
    return slice(2 * s.start, 2 * s.stop)
