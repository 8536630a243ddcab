"""Concave transformations, their inverse estimators, and mechanism variances.

A transformation privatizer maps a nonnegative query q to f(q + a), adds
Gaussian noise, and applies an estimator g to undo the transformation.
Three transformation kinds are supported (identity, kth root, log) together
with three estimator families:

* mean-unbiased (the default; Hermite polynomial form for kth roots,
  exponential form for log),
* median-unbiased (risk-minimizing: inverse above f(a), zero below),
* naive inverse (the canonical inverse on all of R; biased, kept for
  comparison only).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import specfun
from .errors import DomainError, ParameterError

__all__ = [
    "TransformKind",
    "TransformSpec",
    "EstimatorKind",
    "EstimatorSpec",
    "MAX_ROOT_ORDER",
    "apply_transform",
    "transform_at_offset",
    "estimate",
    "mechanism_variance",
    "transform_to_json",
    "transform_from_json",
    "estimator_to_json",
    "estimator_from_json",
]

# Matches the Hermite order cap in specfun.
MAX_ROOT_ORDER = specfun.HERMITE_MAX_ORDER


class TransformKind(str, Enum):
    IDENTITY = "identity"
    KTH_ROOT = "kth_root"
    LOG = "log"


class EstimatorKind(str, Enum):
    MEAN_UNBIASED = "mean_unbiased"
    MEDIAN_UNBIASED = "median_unbiased"
    NAIVE_INVERSE = "naive"


@dataclass(frozen=True)
class TransformSpec:
    """A transformation f plus its offset a; the privatizer maps q to f(q + a)."""

    kind: TransformKind
    offset_a: float = 0.0
    k: int = 1

    def __post_init__(self):
        if self.kind is TransformKind.LOG:
            if not self.offset_a > 0.0:
                raise ParameterError(f"log transform requires a > 0, got a={self.offset_a}")
        elif self.offset_a < 0.0:
            raise ParameterError(f"offset must be >= 0, got a={self.offset_a}")
        if self.kind is TransformKind.KTH_ROOT:
            if not isinstance(self.k, (int, np.integer)) or not 1 <= self.k <= MAX_ROOT_ORDER:
                raise ParameterError(
                    f"kth root order must be an integer in [1, {MAX_ROOT_ORDER}], got {self.k}"
                )


@dataclass(frozen=True)
class EstimatorSpec:
    kind: EstimatorKind = EstimatorKind.MEAN_UNBIASED


def apply_transform(t: TransformSpec, x):
    """Evaluate f(x + a) for a nonnegative query value x (scalar or array)."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0.0):
        raise DomainError(f"transform input must be >= 0, got {x}")
    shifted = arr + t.offset_a
    if t.kind is TransformKind.IDENTITY:
        out = shifted
    elif t.kind is TransformKind.KTH_ROOT:
        out = shifted ** (1.0 / t.k)
    else:
        out = np.log(shifted)
    return float(out) if arr.ndim == 0 else out


def transform_at_offset(t: TransformSpec) -> float:
    """f(a): the transformed value of an empty query (the estimator's hinge)."""
    return apply_transform(t, 0.0)


def _invert(t: TransformSpec, v):
    """Canonical inverse of f on all of R (v^k, e^v, or v)."""
    if t.kind is TransformKind.IDENTITY:
        return v
    if t.kind is TransformKind.KTH_ROOT:
        return v ** t.k
    return np.exp(v)


def estimate(t: TransformSpec, e: EstimatorSpec, sigma: float, v_noisy):
    """Apply the estimator g to a noisy transformed value (total on R).

    Mean-unbiased forms: v - a (identity), (-sigma)^k He_k(-v/sigma) - a
    (kth root), exp(v - sigma^2/2) - a (log).  The median-unbiased estimator
    returns f^(-1)(v) - a above f(a) and 0 below; the naive inverse applies
    the canonical inverse everywhere (biased).
    """
    if not sigma > 0.0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    arr = np.asarray(v_noisy, dtype=float)
    scalar = arr.ndim == 0
    a = t.offset_a

    if e.kind is EstimatorKind.MEAN_UNBIASED:
        if t.kind is TransformKind.IDENTITY:
            out = arr - a
        elif t.kind is TransformKind.KTH_ROOT:
            out = (-sigma) ** t.k * specfun.hermite_prob(t.k, -arr / sigma) - a
        else:
            out = np.exp(arr - 0.5 * sigma * sigma) - a
    elif e.kind is EstimatorKind.MEDIAN_UNBIASED:
        hinge = transform_at_offset(t)
        out = np.where(arr >= hinge, _invert(t, np.maximum(arr, hinge)) - a, 0.0)
    else:
        out = _invert(t, arr) - a
    return float(out) if scalar else out


def mechanism_variance(t: TransformSpec, sigma: float, q):
    """Output variance of the mean-unbiased transformation mechanism at true
    query value q.

    Identity: sigma^2.  Log: (e^(sigma^2) - 1)(q + a)^2.  Kth root:
    sum_{i=0}^{k-1} C(k,i)^2 (k-i)! sigma^(2(k-i)) (q + a)^(2i/k).
    """
    if not sigma > 0.0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    arr = np.asarray(q, dtype=float)
    if np.any(arr < 0.0):
        raise DomainError(f"query value must be >= 0, got {q}")
    scalar = arr.ndim == 0
    qa = arr + t.offset_a

    if t.kind is TransformKind.IDENTITY:
        out = np.full_like(arr, sigma * sigma)
    elif t.kind is TransformKind.LOG:
        out = np.expm1(sigma * sigma) * qa ** 2
    else:
        k = t.k
        out = np.zeros_like(arr)
        for i in range(k):
            out = out + (math.comb(k, i) ** 2 * math.factorial(k - i)
                         * sigma ** (2 * (k - i)) * qa ** (2.0 * i / k))
    return float(out) if scalar else out


# --- JSON wire format --------------------------------------------------------

def transform_to_json(t: TransformSpec) -> dict:
    out = {"kind": t.kind.value, "a": t.offset_a}
    if t.kind is TransformKind.KTH_ROOT:
        out["k"] = t.k
    return out


def transform_from_json(obj) -> TransformSpec:
    if isinstance(obj, str):
        obj = json.loads(obj)
    try:
        kind = TransformKind(obj["kind"])
    except (KeyError, ValueError) as exc:
        raise ParameterError(f"malformed transform spec: {obj!r}") from exc
    return TransformSpec(kind=kind, offset_a=float(obj.get("a", 0.0)),
                         k=int(obj.get("k", 1)))


def estimator_to_json(e: EstimatorSpec) -> dict:
    return {"estimator": e.kind.value}


def estimator_from_json(obj) -> EstimatorSpec:
    if isinstance(obj, str):
        obj = json.loads(obj)
    try:
        return EstimatorSpec(EstimatorKind(obj["estimator"]))
    except (KeyError, ValueError) as exc:
        raise ParameterError(f"malformed estimator spec: {obj!r}") from exc
