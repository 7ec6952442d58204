"""Landmark data model, segmentation, normalization, session files and synthetic dyads."""
from .layout import (
    FACE, BODY, FPS, FRAME_DIM, FUT_LEN, HANDS, LEFT_HAND, N_LANDMARKS, OBS_LEN, RIGHT_HAND,
    SEGMENT_DIMS, SEGMENT_LANDMARKS, SEGMENT_SLICES, SEGMENTS, SEQ_LEN, SegmentedFrame, as_frame,
    flatten_frames, merge_segments, segment_columns, split_segments, unflatten_frames,
)
from .sequence import (
    NORM_EPS, DyadSample, MotionSequence, denormalize, denormalize_array, inference_view,
    normalize_array, normalize_sample, normalize_sequence, pad_sequence, raw_sample, sequence_stats,
    training_view,
)
from .sessions import (
    PersonTrack, Session, fill_missing, load_sessions, parse_session, read_sessions, session_samples,
    session_to_json, write_sessions,
)
from .synth import synth_dyads, synth_pair, synth_sessions
