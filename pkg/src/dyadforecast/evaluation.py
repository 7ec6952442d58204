"""Forecast error reports against the constant-pose baseline.

The error measure is the Euclidean distance between predicted and true
landmarks in original (denormalized) coordinates, averaged over
landmarks of a segment, forecast frames and samples.  Sums go through
``math.fsum`` so the report does not depend on sample order.
"""
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ReportError
from .model import forecast
from .motiondata import OBS_LEN, SEGMENT_SLICES, SEGMENTS, denormalize_array, normalize_sample, raw_sample


@dataclass
class EvalReport:
    segment_error: dict = field(default_factory=dict)     # segment -> mean distance
    horizon_error: dict = field(default_factory=dict)     # segment -> list, one value per forecast frame
    baseline_error: dict = field(default_factory=dict)
    baseline_horizon_error: dict = field(default_factory=dict)
    baseline_delta: dict = field(default_factory=dict)    # model - baseline
    relative_improvement: dict = field(default_factory=dict)  # 1 - model / baseline
    n_samples: int = 0

    def to_dict(self):
        return asdict(self)

    def write_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    def to_text(self):
        lines = [f"samples: {self.n_samples}", f"{'segment':8s} {'model':>10s} {'baseline':>10s} {'delta':>10s} {'improv':>8s}"]
        for seg in SEGMENTS:
            if seg not in self.segment_error:
                continue
            lines.append(
                f"{seg:8s} {self.segment_error[seg]:10.6f} {self.baseline_error.get(seg, float('nan')):10.6f} "
                f"{self.baseline_delta.get(seg, float('nan')):+10.6f} {100 * self.relative_improvement.get(seg, float('nan')):7.2f}%"
            )
        return "\n".join(lines)

    def write_curve_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            cols = [f"{s}_model" for s in SEGMENTS] + [f"{s}_baseline" for s in SEGMENTS]
            fh.write("frame," + ",".join(cols) + "\n")
            n = len(next(iter(self.horizon_error.values())))
            for t in range(n):
                vals = [self.horizon_error[s][t] for s in SEGMENTS]
                vals += [self.baseline_horizon_error.get(s, [float("nan")] * n)[t] for s in SEGMENTS]
                fh.write(f"{t}," + ",".join(repr(float(v)) for v in vals) + "\n")


def baseline_constant(observed, horizon=50):
    """Repeat the last observed frame ``horizon`` times."""
    observed = np.asarray(observed, dtype=np.float64)
    return np.repeat(observed[..., -1:, :, :], horizon, axis=-3)


def landmark_distances(pred, truth):
    """Euclidean distance per landmark: (..., T, 78, 2) -> (..., T, 78)."""
    diff = np.asarray(pred, dtype=np.float64) - np.asarray(truth, dtype=np.float64)
    return np.sqrt(np.sum(diff * diff, axis=-1))


def segment_errors(preds, truths):
    """Return ``(mean per segment, per-frame curve per segment)`` for (N, T, 78, 2) arrays."""
    preds = np.asarray(preds, dtype=np.float64)
    truths = np.asarray(truths, dtype=np.float64)
    if preds.shape != truths.shape or preds.ndim != 4:
        raise ReportError(f"prediction {preds.shape} and truth {truths.shape} must match as (N, T, 78, 2)")
    if len(preds) == 0:
        raise ReportError("nothing to evaluate")
    dist = landmark_distances(preds, truths)
    means, curves = {}, {}
    for seg in SEGMENTS:
        d = dist[:, :, SEGMENT_SLICES[seg]]
        means[seg] = math.fsum(d.ravel()) / d.size
        curves[seg] = [math.fsum(d[:, t].ravel()) / d[:, t].size for t in range(d.shape[1])]
    return means, curves


def evaluate_predictions(preds, truths, baseline_preds=None):
    means, curves = segment_errors(preds, truths)
    report = EvalReport(segment_error=means, horizon_error=curves, n_samples=len(preds))
    if baseline_preds is not None:
        b_means, b_curves = segment_errors(baseline_preds, truths)
        report.baseline_error = b_means
        report.baseline_horizon_error = b_curves
        for seg in SEGMENTS:
            report.baseline_delta[seg] = means[seg] - b_means[seg]
            report.relative_improvement[seg] = 1.0 - means[seg] / b_means[seg] if b_means[seg] > 0 else 0.0
    return report


def predict_sample(params, sample):
    """Forecast one sample in original coordinates.

    Both people are normalized with observed-window statistics; the
    prediction is mapped back with the target's statistics.
    """
    norm = normalize_sample(raw_sample(sample), window=OBS_LEN)
    pred = forecast(norm.target.observed, norm.partner.observed, params)
    return denormalize_array(pred, norm.target.mu, norm.target.sigma)


def evaluate(params, dataset):
    """Model and constant-pose errors over samples with known futures."""
    if not dataset:
        raise ReportError("empty dataset")
    raws = [raw_sample(s) for s in dataset]
    preds = np.stack([predict_sample(params, s) for s in raws])
    truths = np.stack([s.target.future for s in raws])
    base = np.stack([baseline_constant(s.target.observed, truths.shape[1]) for s in raws])
    return evaluate_predictions(preds, truths, base)
