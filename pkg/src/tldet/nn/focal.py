"""Binary focal loss and its analytic derivative.

The loss is -alpha_t * (1 - p_t)^gamma * ln(p_t) with p_t = p for
positive labels and 1 - p otherwise; alpha_t mirrors the same split
(alpha for positives, 1 - alpha for negatives).  The modulating factor
shrinks the loss of confidently-classified samples, which counters
class imbalance.  At gamma=0 and alpha=1 it reduces exactly to
cross-entropy.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from math import log
from typing import NamedTuple

import numpy as np

from tldet.errors import ValidationError

PT_FLOOR = 1e-12


class FocalClampWarning(RuntimeWarning):
    """Raised via warnings.warn when p_t hits the 1e-12 floor."""


@dataclass(frozen=True)
class FocalParams:
    """alpha in (0, 1]; gamma >= 0.  Defaults follow the reference focal
    loss for dense detection (alpha=0.25, gamma=2)."""

    alpha: float = 0.25
    gamma: float = 2.0

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise ValidationError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.gamma < 0.0:
            raise ValidationError(f"gamma must be >= 0, got {self.gamma}")


def _split(p: float, y: int, fp: FocalParams) -> tuple[float, float]:
    if y not in (0, 1):
        raise ValidationError(f"label must be 0 or 1, got {y}")
    if not (0.0 <= p <= 1.0):
        raise ValidationError(f"probability out of [0, 1]: {p}")
    if y == 1:
        return p, fp.alpha
    return 1.0 - p, 1.0 - fp.alpha


def _floor_pt(pt: float) -> float:
    if pt < PT_FLOOR:
        warnings.warn(
            f"p_t={pt} floored to {PT_FLOOR}", FocalClampWarning, stacklevel=3
        )
        return PT_FLOOR
    return pt


def focal_loss(p: float, y: int, fp: FocalParams) -> float:
    """Focal loss of a single prediction; non-negative.

    p_t = 0 never produces infinity: it is floored to 1e-12 and a
    FocalClampWarning is emitted.
    """
    pt, at = _split(p, y, fp)
    pt = _floor_pt(pt)
    return float(-at * (1.0 - pt) ** fp.gamma * log(pt)) + 0.0


def focal_loss_grad(p: float, y: int, fp: FocalParams) -> float:
    """d(focal_loss)/dp, matching focal_loss including the p_t floor."""
    pt, at = _split(p, y, fp)
    pt = _floor_pt(pt)
    g = fp.gamma
    if g == 0.0 or pt == 1.0:
        modulating_term = 0.0  # limit of g*(1-pt)^(g-1)*ln(pt) as pt -> 1
    else:
        modulating_term = g * (1.0 - pt) ** (g - 1.0) * log(pt)
    d_pt = -at * (-modulating_term + (1.0 - pt) ** g / pt)
    return float(d_pt if y == 1 else -d_pt)


class FocalBatch(NamedTuple):
    mean_loss: float
    n_clamped: int


def focal_loss_batch(p: np.ndarray, y: np.ndarray, fp: FocalParams) -> FocalBatch:
    """Mean focal loss over vectors of probabilities and {0,1} labels."""
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y)
    if p.shape != y.shape:
        raise ValidationError(f"shape mismatch: {p.shape} vs {y.shape}")
    if p.size == 0:
        raise ValidationError("empty batch")
    if not np.all((p >= 0.0) & (p <= 1.0)):
        raise ValidationError("probabilities out of [0, 1]")
    if not np.all((y == 0) | (y == 1)):
        raise ValidationError("labels must be 0 or 1")
    pos = y == 1
    pt = np.where(pos, p, 1.0 - p)
    at = np.where(pos, fp.alpha, 1.0 - fp.alpha)
    clamped = pt < PT_FLOOR
    pt = np.maximum(pt, PT_FLOOR)
    losses = -at * (1.0 - pt) ** fp.gamma * np.log(pt)
    return FocalBatch(float(losses.mean()), int(clamped.sum()))
