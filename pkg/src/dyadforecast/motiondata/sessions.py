"""Line-delimited JSON session files.

One session per line::

    {"session_id": "s0", "fps": 25,
     "persons": [{"id": "A", "frames": [[[x, y] | null, ... x78], ...]}, {...}]}

Each session holds exactly two people with 1..150 frames each; ``null``
marks a missing landmark.  Forecast output uses the same layout with
``"predicted": true`` on each person record.
"""
import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError, ParseError
from .layout import FPS, N_LANDMARKS, SEQ_LEN
from .sequence import DyadSample, pad_sequence


@dataclass(eq=False)
class PersonTrack:
    id: str
    frames: np.ndarray  # (L, 78, 2); NaN where a landmark is missing
    predicted: bool = False

    def __eq__(self, other):
        if not isinstance(other, PersonTrack):
            return NotImplemented
        return (
            self.id == other.id
            and self.predicted == other.predicted
            and self.frames.shape == other.frames.shape
            and np.array_equal(self.frames, other.frames, equal_nan=True)
        )


@dataclass
class Session:
    session_id: str
    persons: list = field(default_factory=list)
    fps: int = FPS


def _parse_frames(raw, record, person):
    if not isinstance(raw, list) or not raw:
        raise ParseError("frames must be a non-empty list", record, f"persons[{person}].frames")
    out = np.empty((len(raw), N_LANDMARKS, 2))
    for t, frame in enumerate(raw):
        if not isinstance(frame, list):
            raise ParseError(f"frame {t} is not a list", record, f"persons[{person}].frames")
        if len(frame) != N_LANDMARKS:
            raise DataError(
                f"record {record}, person {person}, frame {t}: expected {N_LANDMARKS} landmarks, got {len(frame)}"
            )
        for j, pt in enumerate(frame):
            if pt is None:
                out[t, j] = np.nan
                continue
            if (
                not isinstance(pt, list)
                or len(pt) != 2
                or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in pt)
            ):
                raise ParseError(
                    f"frame {t}, landmark {j}: expected [x, y] or null", record, f"persons[{person}].frames"
                )
            out[t, j] = pt
    if not np.all(np.isfinite(out) | np.isnan(out)):
        raise DataError(f"record {record}, person {person}: non-finite coordinate")
    return out


def parse_session(obj, record=0):
    if not isinstance(obj, dict):
        raise ParseError("session must be a JSON object", record)
    for key in ("session_id", "persons"):
        if key not in obj:
            raise ParseError("missing field", record, key)
    fps = obj.get("fps", FPS)
    if not isinstance(fps, int) or isinstance(fps, bool) or fps <= 0:
        raise ParseError("fps must be a positive integer", record, "fps")
    persons = obj["persons"]
    if not isinstance(persons, list) or len(persons) != 2:
        raise ParseError("exactly two persons required", record, "persons")
    tracks = []
    for p, person in enumerate(persons):
        if not isinstance(person, dict):
            raise ParseError("person must be an object", record, f"persons[{p}]")
        for key in ("id", "frames"):
            if key not in person:
                raise ParseError("missing field", record, f"persons[{p}].{key}")
        tracks.append(
            PersonTrack(str(person["id"]), _parse_frames(person["frames"], record, p), bool(person.get("predicted", False)))
        )
    return Session(str(obj["session_id"]), tracks, fps)


def read_sessions(path):
    sessions = []
    with open(path, encoding="utf-8") as fh:
        for record, line in enumerate(fh):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON ({exc.msg})", record) from None
            sessions.append(parse_session(obj, record))
    return sessions


def _frames_to_json(frames):
    return [
        [None if np.isnan(pt[0]) or np.isnan(pt[1]) else [float(pt[0]), float(pt[1])] for pt in frame]
        for frame in frames
    ]


def session_to_json(session):
    persons = []
    for track in session.persons:
        rec = {"id": track.id, "frames": _frames_to_json(track.frames)}
        if track.predicted:
            rec["predicted"] = True
        persons.append(rec)
    return {"session_id": session.session_id, "fps": session.fps, "persons": persons}


def write_sessions(sessions, path):
    # json floats use repr, which round-trips float64 exactly
    with open(path, "w", encoding="utf-8") as fh:
        for s in sessions:
            fh.write(json.dumps(session_to_json(s), separators=(",", ":")))
            fh.write("\n")


def fill_missing(frames):
    """Fill NaN landmarks from the nearest earlier frame, then the nearest later one."""
    out = np.array(frames, dtype=np.float64)
    missing = np.isnan(out).any(axis=-1)
    if not missing.any():
        return out
    n_frames = len(out)
    for j in np.flatnonzero(missing.any(axis=0)):
        col = missing[:, j]
        if col.all():
            raise DataError(f"landmark {j} is missing in every frame")
        idx = np.where(~col, np.arange(n_frames), -1)
        idx = np.maximum.accumulate(idx)
        first = np.flatnonzero(~col)[0]
        idx[idx < 0] = first
        out[:, j] = out[idx, j]
    return out


def track_to_sequence(track):
    if len(track.frames) > SEQ_LEN:
        raise DataError(f"person {track.id!r} has {len(track.frames)} frames, more than {SEQ_LEN}")
    return pad_sequence(list(fill_missing(track.frames)))


def session_samples(session, record=0):
    try:
        a, b = (track_to_sequence(t) for t in session.persons)
    except DataError as exc:
        raise DataError(f"record {record} ({session.session_id}): {exc}") from None
    return [DyadSample(target=a, partner=b), DyadSample(target=b, partner=a)]


def load_sessions(path):
    """Read a session file; each session yields two samples, one per target role."""
    samples = []
    for record, session in enumerate(read_sessions(path)):
        samples.extend(session_samples(session, record))
    return samples
