"""Prediction intervals for the mechanisms' noisy outputs.

Given the true query value, a transformation mechanism's output lies in
[min g(X), max g(X)] with probability p, where X is the central-p Gaussian
interval around f(q + a).  The mean-unbiased kth-root estimators are
polynomials whose extrema can sit strictly inside X, so interior stationary
points are enumerated alongside the endpoints.  Additive mechanisms are
symmetric: the interval is q plus the noise quantiles at the two tails.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import specfun
from .distributions import NoiseSpec, noise_quantile
from .errors import DomainError
from .transform import (
    EstimatorKind,
    EstimatorSpec,
    TransformSpec,
    TransformKind,
    apply_transform,
    estimate,
)

__all__ = [
    "PredictionInterval",
    "transform_prediction_interval",
    "additive_prediction_interval",
]


@dataclass(frozen=True)
class PredictionInterval:
    lo: float
    hi: float
    coverage: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise DomainError(f"interval endpoints out of order: [{self.lo}, {self.hi}]")
        if not 0.0 < self.coverage < 1.0:
            raise DomainError(f"coverage must lie in (0, 1), got {self.coverage}")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, x) -> bool:
        return bool(np.all((self.lo <= np.asarray(x)) & (np.asarray(x) <= self.hi)))


# Stationary points of the mean-unbiased kth-root estimator are the roots of
# He_{k-1}(-v/sigma); closed forms for the orders the mechanisms use.
_HERMITE_ROOTS = {0: (), 1: (0.0,), 2: (-1.0, 1.0), 3: (-np.sqrt(3.0), 0.0, np.sqrt(3.0))}


def _stationary_points(t: TransformSpec, e: EstimatorSpec, sigma: float):
    """Interior critical points of the estimator g, as noisy-value abscissas."""
    if e.kind is EstimatorKind.MEAN_UNBIASED and t.kind is TransformKind.KTH_ROOT:
        order = t.k - 1
        if order in _HERMITE_ROOTS:
            roots = np.asarray(_HERMITE_ROOTS[order])
        else:
            # exact stationary-point enumeration for high orders: eigenvalue
            # roots of the probabilist's Hermite polynomial
            coeffs = np.zeros(order + 1)
            coeffs[order] = 1.0
            roots = np.polynomial.hermite_e.hermeroots(coeffs)
        return [-sigma * float(r) for r in roots]
    if e.kind is EstimatorKind.NAIVE_INVERSE and t.kind is TransformKind.KTH_ROOT \
            and t.k % 2 == 0:
        return [0.0]  # v^k has its minimum at v = 0 for even k
    return []  # identity, log, and median-unbiased estimators are monotone


def transform_prediction_interval(t: TransformSpec, sigma: float, e: EstimatorSpec,
                                  q: float, p: float) -> PredictionInterval:
    """Central-p prediction interval of the transformation mechanism at true
    query value q."""
    if not 0.0 < p < 1.0:
        raise DomainError(f"coverage must lie in (0, 1), got {p}")
    if not sigma > 0.0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    center = apply_transform(t, q)
    v_lo = center + sigma * specfun.std_normal_quantile((1.0 - p) / 2.0)
    v_hi = center + sigma * specfun.std_normal_quantile((1.0 + p) / 2.0)
    candidates = [v_lo, v_hi]
    candidates += [v for v in _stationary_points(t, e, sigma) if v_lo < v < v_hi]
    values = estimate(t, e, sigma, np.asarray(candidates))
    return PredictionInterval(lo=float(np.min(values)), hi=float(np.max(values)),
                              coverage=p)


def additive_prediction_interval(noise: NoiseSpec, q: float, p: float) -> PredictionInterval:
    """Central-p prediction interval of an additive mechanism: symmetric
    about q with half-width the noise quantile at (1+p)/2."""
    if not 0.0 < p < 1.0:
        raise DomainError(f"coverage must lie in (0, 1), got {p}")
    lo = q + noise_quantile(noise, (1.0 - p) / 2.0)
    hi = q + noise_quantile(noise, (1.0 + p) / 2.0)
    return PredictionInterval(lo=float(lo), hi=float(hi), coverage=p)
