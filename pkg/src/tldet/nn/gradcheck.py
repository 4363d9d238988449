"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from tldet.errors import NumericError, ValidationError


@dataclass
class GradReport:
    """Worst coordinate found by a finite-difference sweep.

    Relative error is |analytic - numeric| / max(|analytic|, |numeric|, 1e-12).
    """

    max_rel_err: float
    coord: int
    analytic: float
    numeric: float
    n_coords: int

    def as_json_dict(self) -> dict:
        return {
            "max_rel_err": self.max_rel_err,
            "coord": self.coord,
            "analytic": self.analytic,
            "numeric": self.numeric,
            "n_coords": self.n_coords,
        }


def grad_check(
    f: Callable[[np.ndarray], float],
    x0: np.ndarray,
    analytic: np.ndarray,
    step: float = 1e-6,
) -> GradReport:
    """Compare an analytic gradient against central differences of f at x0.

    Every coordinate is perturbed by +-step; f must be deterministic.
    Raises NumericError when any probed value is non-finite.
    """
    if step <= 0:
        raise ValidationError(f"step must be positive, got {step}")
    x0 = np.asarray(x0, dtype=np.float64)
    analytic = np.asarray(analytic, dtype=np.float64)
    if analytic.shape != x0.shape:
        raise ValidationError(
            f"analytic gradient shape {analytic.shape} != point shape {x0.shape}"
        )
    if not np.all(np.isfinite(x0)) or not np.all(np.isfinite(analytic)):
        raise NumericError("non-finite point or analytic gradient")

    flat = x0.ravel().copy()
    grad_flat = analytic.ravel()
    worst = GradReport(0.0, -1, 0.0, 0.0, flat.size)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        f_plus = f(flat.reshape(x0.shape))
        flat[i] = orig - step
        f_minus = f(flat.reshape(x0.shape))
        flat[i] = orig
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise NumericError(f"non-finite function value at coordinate {i}")
        numeric = (f_plus - f_minus) / (2.0 * step)
        a = float(grad_flat[i])
        rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-12)
        if rel > worst.max_rel_err:
            worst = GradReport(rel, i, a, float(numeric), flat.size)
    return worst
