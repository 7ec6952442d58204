"""Generator and discriminator objectives."""
from dataclasses import dataclass

import numpy as np

from ..errors import ContractError
from ..motiondata.layout import SEGMENTS
from ..numkernel import Tensor, as_tensor, clamp, log, mean, mul, neg, square, sub

PROB_EPS = 1e-7


@dataclass(frozen=True)
class LossWeights:
    alpha1: float = 10.0  # face
    alpha2: float = 10.0  # body
    alpha3: float = 10.0  # hands
    beta: float = 1.0

    def __post_init__(self):
        for name in ("alpha1", "alpha2", "alpha3", "beta"):
            if getattr(self, name) < 0:
                raise ContractError(f"loss weight {name} must be non-negative")

    def segment_weight(self, segment):
        return {"face": self.alpha1, "body": self.alpha2, "hands": self.alpha3}[segment]


def _probabilities(p):
    p = as_tensor(p)
    if not np.all(np.isfinite(p.data)) or np.any(p.data < 0) or np.any(p.data > 1):
        raise ContractError("discriminator outputs must be probabilities in [0, 1]")
    return clamp(p, PROB_EPS, 1.0 - PROB_EPS)


def mse(pred, true):
    return mean(square(sub(pred, true)))


def adversarial_term(d_fake, non_saturating=False):
    """``mean(log(1 - D(fake)))`` as minimised by the generator.

    With ``non_saturating`` the common ``-mean(log D(fake))`` variant is used instead.
    """
    p = _probabilities(d_fake)
    if non_saturating:
        return neg(mean(log(p)))
    return mean(log(sub(1.0, p)))


def generator_loss_terms(pred_segments, true_segments, d_fake, w, adversarial_enabled, non_saturating=False):
    """Weighted per-segment MSE plus the adversarial term.

    Returns a dict of scalar tensors: ``face``, ``body``, ``hands`` (raw
    MSEs), ``adv`` (unweighted adversarial term, exactly 0 when disabled)
    and ``total``.
    """
    terms = {}
    total = None
    for seg in SEGMENTS:
        pred, true = as_tensor(pred_segments[seg]), as_tensor(true_segments[seg])
        if pred.shape != true.shape:
            raise ContractError(f"{seg}: prediction {pred.shape} vs truth {true.shape}")
        terms[seg] = mse(pred, true)
        weighted = mul(terms[seg], w.segment_weight(seg))
        total = weighted if total is None else total + weighted
    if adversarial_enabled:
        terms["adv"] = adversarial_term(d_fake, non_saturating)
        total = total + mul(terms["adv"], w.beta)
    else:
        terms["adv"] = Tensor(0.0)
    terms["total"] = total
    return terms


def generator_loss(pred_segments, true_segments, d_fake, w, adversarial_enabled, non_saturating=False):
    return generator_loss_terms(pred_segments, true_segments, d_fake, w, adversarial_enabled, non_saturating)["total"]


def discriminator_loss(d_real, d_fake):
    """``-mean(log D(real)) - mean(log(1 - D(fake)))``."""
    real = _probabilities(d_real)
    fake = _probabilities(d_fake)
    return sub(neg(mean(log(real))), mean(log(sub(1.0, fake))))
