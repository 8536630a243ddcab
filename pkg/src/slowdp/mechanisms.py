"""The privatization algorithms: transformation, additive, and the
unit-splitting Gaussian baseline.

Outputs are never clamped or rounded here; negative noisy sums are emitted
as-is to preserve unbiasedness.  (Clamping is post-processing and is left to
callers; the CLI exposes it as an optional flag.)  Every mechanism accepts a
deterministic test hook that injects the underlying standard-uniform or
standard-normal draw.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import specfun
from .distributions import (
    NoiseSpec,
    RngStream,
    noise_from_json,
    noise_quantile,
    noise_to_json,
)
from .errors import DomainError, ParameterError
from .transform import (
    EstimatorKind,
    EstimatorSpec,
    TransformKind,
    TransformSpec,
    apply_transform,
    estimate,
)

__all__ = [
    "TransformationMechanism",
    "AdditiveMechanism",
    "UnitSplitGaussian",
    "MechanismSpec",
    "transformation_privatize",
    "additive_privatize",
    "unit_split_count",
    "unit_split_privatize",
    "privatize",
    "mechanism_to_json",
    "mechanism_from_json",
]


@dataclass(frozen=True)
class TransformationMechanism:
    transform: TransformSpec
    sigma: float
    estimator: EstimatorSpec = field(default_factory=EstimatorSpec)

    def __post_init__(self):
        if not self.sigma > 0.0:
            raise ParameterError(f"sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class AdditiveMechanism:
    noise: NoiseSpec


@dataclass(frozen=True)
class UnitSplitGaussian:
    """Gaussian mechanism run after splitting records into rows of at most
    ``threshold``; the split changes only the policy accounting, not the sum."""

    threshold: float
    sigma: float

    def __post_init__(self):
        if not self.threshold > 0.0:
            raise ParameterError(f"threshold must be positive, got {self.threshold}")
        if not self.sigma > 0.0:
            raise ParameterError(f"sigma must be positive, got {self.sigma}")


MechanismSpec = Union[TransformationMechanism, AdditiveMechanism, UnitSplitGaussian]


def _std_normal_draw(rng: RngStream, size):
    return specfun.std_normal_quantile(rng.uniform(size=size))


def transformation_privatize(q, t: TransformSpec, sigma: float, e: EstimatorSpec,
                             rng: RngStream | None, *, xi=None, size=None):
    """Privatize a nonnegative query: estimate(f(q + a) + sigma * xi).

    ``xi`` injects the standard normal draw(s) for deterministic tests;
    otherwise one draw per output is taken from ``rng`` by inverse CDF.
    """
    if xi is None:
        xi = _std_normal_draw(rng, size)
    v = apply_transform(t, q) + sigma * np.asarray(xi, dtype=float)
    return estimate(t, e, sigma, v)


def additive_privatize(q, noise: NoiseSpec, rng: RngStream | None, *,
                       draw=None, size=None):
    """Privatize a query by adding a draw from the noise distribution."""
    if draw is None:
        draw = noise_quantile(noise, rng.uniform(size=size))
    return q + draw


def unit_split_count(value, threshold: float):
    """Number of rows a record of the given value splits into: ceil(value /
    threshold), with a zero-valued record counting as one unsplit row."""
    if not threshold > 0.0:
        raise DomainError(f"threshold must be positive, got {threshold}")
    arr = np.asarray(value, dtype=float)
    if np.any(arr < 0.0):
        raise DomainError(f"record value must be >= 0, got {value}")
    count = np.maximum(np.ceil(arr / threshold), 1.0)
    return int(count) if arr.ndim == 0 else count.astype(int)


def unit_split_privatize(q, threshold: float, sigma: float, rng: RngStream | None,
                         *, xi=None, size=None):
    """Gaussian privatization of a sum under unit splitting.

    Splitting leaves a sum's value unchanged; the threshold matters only for
    the policy function, so this is exactly the Gaussian additive mechanism.
    """
    if not threshold > 0.0:
        raise DomainError(f"threshold must be positive, got {threshold}")
    if xi is None:
        xi = _std_normal_draw(rng, size)
    return q + sigma * xi


def privatize(mech: MechanismSpec, q, rng: RngStream | None, *, u=None, size=None):
    """Run any mechanism on a query value.

    ``u`` injects the underlying uniform draw(s) for deterministic tests;
    u = 0.5 yields the zero-noise path for every mechanism.
    """
    if isinstance(mech, TransformationMechanism):
        xi = None if u is None else specfun.std_normal_quantile(u)
        return transformation_privatize(q, mech.transform, mech.sigma, mech.estimator,
                                        rng, xi=xi, size=size)
    if isinstance(mech, AdditiveMechanism):
        draw = None if u is None else noise_quantile(mech.noise, u)
        return additive_privatize(q, mech.noise, rng, draw=draw, size=size)
    if isinstance(mech, UnitSplitGaussian):
        xi = None if u is None else specfun.std_normal_quantile(u)
        return unit_split_privatize(q, mech.threshold, mech.sigma, rng, xi=xi, size=size)
    raise ParameterError(f"not a mechanism spec: {mech!r}")


# --- JSON wire format (field names mirror the experiment parameter tables) ---

def mechanism_to_json(mech: MechanismSpec) -> dict:
    if isinstance(mech, TransformationMechanism):
        t = mech.transform
        out = {"mechanism": t.kind.value, "sigma": mech.sigma, "a": t.offset_a,
               "estimator": mech.estimator.kind.value}
        if t.kind is TransformKind.KTH_ROOT:
            out["k"] = t.k
        return out
    if isinstance(mech, AdditiveMechanism):
        out = noise_to_json(mech.noise)
        return {"mechanism": out.pop("family"), **out}
    if isinstance(mech, UnitSplitGaussian):
        return {"mechanism": "unit_split", "threshold": mech.threshold,
                "sigma": mech.sigma}
    raise ParameterError(f"not a mechanism spec: {mech!r}")


_TRANSFORM_NAMES = {k.value for k in TransformKind}
_NOISE_NAMES = {"gaussian", "gen_gaussian", "exp_polylog"}


def mechanism_from_json(obj) -> MechanismSpec:
    """Parse a mechanism from its JSON object (or JSON text) form."""
    if isinstance(obj, str):
        obj = json.loads(obj)
    if not isinstance(obj, dict) or "mechanism" not in obj:
        raise ParameterError(f"malformed mechanism spec: {obj!r}")
    name = obj["mechanism"]
    try:
        if name in _NOISE_NAMES:
            noise = noise_from_json({"family": name,
                                     **{k: v for k, v in obj.items() if k != "mechanism"}})
            return AdditiveMechanism(noise=noise)
        if name in _TRANSFORM_NAMES:
            t = TransformSpec(kind=TransformKind(name),
                              offset_a=float(obj.get("a", 0.0)),
                              k=int(obj.get("k", 1)))
            e = EstimatorSpec(EstimatorKind(obj.get("estimator", "mean_unbiased")))
            return TransformationMechanism(transform=t, sigma=float(obj["sigma"]),
                                           estimator=e)
        if name == "unit_split":
            return UnitSplitGaussian(threshold=float(obj["threshold"]),
                                     sigma=float(obj["sigma"]))
    except KeyError as exc:
        raise ParameterError(f"mechanism spec missing field {exc} in {obj!r}") from exc
    except ValueError as exc:
        raise ParameterError(f"malformed mechanism spec: {obj!r}") from exc
    raise ParameterError(f"unknown mechanism: {name!r}")
