"""Synthetic dyadic motion.

Both people move as a template pose plus sums of sinusoids (0.2-2 Hz)
whose amplitude falls off as 1/f, so peak velocity stays bounded as in
real movement: a whole-person sway, one shared component per body group
(face, body, each hand) and a small per-landmark term.  The target additionally
copies the partner's body-centroid displacement with a 10-frame delay,
scaled by ``coupling``, so the partner's observed past carries
information about the first part of the target's future.  Only the
target gets Gaussian jitter; the partner stays smooth.
"""
from dataclasses import dataclass

import numpy as np

from .layout import BODY, FACE, FPS, LEFT_HAND, N_LANDMARKS, RIGHT_HAND, SEQ_LEN
from .sequence import DyadSample, pad_sequence
from .sessions import PersonTrack, Session

DELAY = 10
JITTER = 0.005
FREQ_RANGE = (0.2, 2.0)
REF_FREQ = 0.63  # amplitude ranges below apply at this frequency

GROUPS = {"face": FACE, "body": BODY, "left_hand": LEFT_HAND, "right_hand": RIGHT_HAND}
# amplitude ranges in image units
SWAY_AMP = (0.01, 0.03)
GROUP_AMP = {"face": (0.004, 0.012), "body": (0.006, 0.02), "left_hand": (0.01, 0.04), "right_hand": (0.01, 0.04)}
LANDMARK_AMP = (0.0, 0.004)
N_TERMS = 2


def template_pose():
    """A frontal seated-person layout in normalized image coordinates."""
    pose = np.empty((N_LANDMARKS, 2))
    ang = np.linspace(0.0, 2.0 * np.pi, 28, endpoint=False)
    pose[FACE] = np.stack([0.5 + 0.055 * np.cos(ang), 0.24 + 0.075 * np.sin(ang)], axis=1)
    pose[BODY] = [
        [0.50, 0.36], [0.50, 0.40], [0.40, 0.41], [0.60, 0.41], [0.35, 0.55],
        [0.65, 0.55], [0.39, 0.67], [0.61, 0.67], [0.45, 0.76], [0.55, 0.76],
    ]
    fan = np.linspace(-0.6, 0.6, 20)
    radius = np.tile([0.015, 0.028, 0.04, 0.05], 5)
    for sl, wrist, sign in ((LEFT_HAND, pose[28 + 6], -1.0), (RIGHT_HAND, pose[28 + 7], 1.0)):
        pose[sl] = wrist + np.stack([sign * radius * np.sin(fan), radius * np.cos(fan)], axis=1)
    return pose


def _sinusoids(rng, n_series, amp_range, t):
    """(len(t), n_series, 2) sums of N_TERMS random sinusoids per series and axis."""
    shape = (N_TERMS, n_series, 2)
    amp = rng.uniform(*amp_range, size=shape)
    freq = rng.uniform(*FREQ_RANGE, size=shape)
    phase = rng.uniform(0.0, 2.0 * np.pi, size=shape)
    amp = amp * (REF_FREQ / freq)
    arg = 2.0 * np.pi * freq[None] * t[:, None, None, None] / FPS + phase[None]
    return (amp[None] * np.sin(arg)).sum(axis=1)


def person_base(rng, n_frames=SEQ_LEN):
    """Noise-free trajectory of one person, (n_frames, 78, 2)."""
    t = np.arange(n_frames, dtype=np.float64)
    scale = rng.uniform(0.9, 1.1)
    offset = rng.uniform(-0.05, 0.05, size=2)
    pose = (template_pose() - 0.5) * scale + 0.5 + offset
    motion = np.repeat(_sinusoids(rng, 1, SWAY_AMP, t), N_LANDMARKS, axis=1)
    for name, sl in GROUPS.items():
        n = sl.stop - sl.start
        motion[:, sl] += np.repeat(_sinusoids(rng, 1, GROUP_AMP[name], t), n, axis=1)
    motion += _sinusoids(rng, N_LANDMARKS, LANDMARK_AMP, t)
    return pose[None] + motion


def body_centroid(frames):
    return np.asarray(frames)[..., BODY, :].mean(axis=-2)


def delayed_displacement(frames, delay=DELAY):
    """Body-centroid displacement from frame 0, shifted ``delay`` frames later (zero before)."""
    disp = body_centroid(frames) - body_centroid(frames)[0]
    out = np.zeros_like(disp)
    out[delay:] = disp[: len(disp) - delay]
    return out


@dataclass
class SynthPair:
    partner: np.ndarray
    target: np.ndarray
    target_base: np.ndarray


def synth_pair(rng, coupling, jitter=JITTER, n_frames=SEQ_LEN):
    """Generate one coupled pair of (n_frames, 78, 2) trajectories."""
    if not 0.0 <= coupling <= 1.0:
        raise ValueError(f"coupling must be in [0, 1], got {coupling}")
    partner = person_base(rng, n_frames)
    base = person_base(rng, n_frames)
    target = base + coupling * delayed_displacement(partner)[:, None, :]
    if jitter > 0:
        target = target + rng.normal(0.0, jitter, size=target.shape)
    return SynthPair(partner, target, base)


def synth_sessions(seed, n_sessions, coupling, jitter=JITTER):
    """Sessions with person ``A`` as the driving partner and ``B`` as the coupled target."""
    if n_sessions < 1:
        raise ValueError("n_sessions must be >= 1")
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n_sessions):
        pair = synth_pair(rng, coupling, jitter)
        out.append(
            Session(f"synth-{seed}-{i:05d}", [PersonTrack("A", pair.partner), PersonTrack("B", pair.target)])
        )
    return out


def synth_dyads(seed, n_samples, coupling, jitter=JITTER):
    """Raw (unnormalized) samples with the coupled person as target."""
    return [
        DyadSample(target=pad_sequence(list(s.persons[1].frames)), partner=pad_sequence(list(s.persons[0].frames)))
        for s in synth_sessions(seed, n_samples, coupling, jitter)
    ]
