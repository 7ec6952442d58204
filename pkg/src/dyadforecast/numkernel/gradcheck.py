"""Central finite-difference checks for tape gradients.

Relative error per entry is ``|analytic - numeric| / max(|analytic|, |numeric|, floor)``
with ``floor = 1e-6 * max(1, |loss|)``.  Rounding noise in a central
difference grows like ``eps * |loss| / step`` (about 1e-11 * |loss| at
step 1e-5), so the floor stops near-zero gradient entries from turning
that noise into a large ratio while staying far below typical entries.
"""
from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor, backward

DEFAULT_STEP = 1e-5
DEFAULT_FLOOR = 1e-6


def relative_error(analytic, numeric, floor=DEFAULT_FLOOR):
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


@dataclass
class GradCheckResult:
    name: str
    max_rel_error: float
    per_input: dict = field(default_factory=dict)
    entries_checked: int = 0

    @property
    def worst_input(self):
        if not self.per_input:
            return None
        return max(self.per_input, key=self.per_input.get)


def check_gradients(fn, inputs, name="", step=DEFAULT_STEP, max_entries=None, rng=None, floor=DEFAULT_FLOOR):
    """Compare tape gradients of ``fn`` against central differences.

    ``fn`` maps a dict of :class:`Tensor` (same keys as ``inputs``) to a
    scalar tensor.  With ``max_entries`` set, a random subset of that many
    coordinates per input is perturbed instead of every coordinate.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    base = {k: np.array(v, dtype=np.float64) for k, v in inputs.items()}

    leaves = {k: Tensor(v.copy(), requires_grad=True, name=k) for k, v in base.items()}
    loss = fn(leaves)
    floor = floor * max(1.0, abs(float(loss.data)))
    names = list(leaves)
    analytic = dict(zip(names, backward(loss, wrt=[leaves[k] for k in names])))

    def evaluate(k, flat_idx, delta):
        arrs = {j: (v.copy() if j == k else v) for j, v in base.items()}
        arrs[k].reshape(-1)[flat_idx] += delta
        return float(fn({j: Tensor(a) for j, a in arrs.items()}).data)

    per_input = {}
    count = 0
    for k in names:
        size = base[k].size
        if max_entries is not None and size > max_entries:
            idx = rng.choice(size, size=max_entries, replace=False)
        else:
            idx = np.arange(size)
        worst = 0.0
        flat_analytic = analytic[k].reshape(-1)
        for i in idx:
            num = (evaluate(k, i, step) - evaluate(k, i, -step)) / (2.0 * step)
            worst = max(worst, float(relative_error(flat_analytic[i], num, floor)))
        per_input[k] = worst
        count += len(idx)
    overall = max(per_input.values()) if per_input else 0.0
    return GradCheckResult(name, overall, per_input, count)
