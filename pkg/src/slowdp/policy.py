"""Per-record privacy-loss accounting.

Policy functions map a record's value (through its per-record sensitivity)
to its maximum privacy loss.  Transformation mechanisms and the Gaussian /
unit-splitting baselines carry zero-concentrated (PRzCDP) guarantees
directly; the heavy-tailed additive mechanisms carry pure per-record DP
(PRDP) guarantees that convert to PRzCDP through the tanh tightening
eps -> tanh(eps/2) eps.

Policy functions are represented as closed, serializable values (parameters
plus kind, never opaque callbacks) so a release can publish the policy
function itself alongside the noisy statistics.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np

from .distributions import (
    ExpPolylogNoise,
    GaussianNoise,
    GenGaussianNoise,
    NoiseSpec,
    noise_from_json,
    noise_to_json,
)
from .errors import DomainError, FamilyError, ParameterError
from .mechanisms import (
    AdditiveMechanism,
    MechanismSpec,
    TransformationMechanism,
    UnitSplitGaussian,
    unit_split_count,
)
from .transform import (
    TransformSpec,
    apply_transform,
    transform_at_offset,
    transform_from_json,
    transform_to_json,
)

__all__ = [
    "PolicyFlavor",
    "DifferingPair",
    "TransformSource",
    "AdditiveSource",
    "GaussianSource",
    "UnitSplitSource",
    "ConstantSource",
    "PolicySpec",
    "ComposedPolicy",
    "PolicyEval",
    "per_record_sensitivity_sum",
    "transform_policy_loss",
    "additive_prdp_loss",
    "prdp_to_przcdp",
    "gaussian_zcdp_loss",
    "unit_split_loss",
    "compose_sequential",
    "compose_parallel",
    "group_loss_coefficient",
    "bounded_transform_policy",
    "bounded_additive_prdp",
    "policy_for_mechanism",
    "policy_to_json",
    "policy_from_json",
]


class PolicyFlavor(str, Enum):
    PRZCDP = "przcdp"
    PRDP = "prdp"


@dataclass(frozen=True)
class DifferingPair:
    """A bounded-neighbor differing pair: the two values one record may take."""

    r_value: float
    r_prime_value: float

    def __post_init__(self):
        if self.r_value < 0.0 or self.r_prime_value < 0.0:
            raise ParameterError(
                f"differing pair values must be >= 0, got {self.r_value}, "
                f"{self.r_prime_value}"
            )


# --- pointwise policy formulas ------------------------------------------------

def per_record_sensitivity_sum(value):
    """Per-record sensitivity of a sum query: the record's own value."""
    arr = np.asarray(value, dtype=float)
    if np.any(arr < 0.0):
        raise DomainError(f"record value must be >= 0, got {value}")
    return float(arr) if arr.ndim == 0 else arr


def transform_policy_loss(t: TransformSpec, sigma: float, delta_r):
    """PRzCDP policy of the transformation mechanism:
    |f(delta + a) - f(a)|^2 / (2 sigma^2)."""
    if not sigma > 0.0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    diff = np.asarray(apply_transform(t, delta_r)) - transform_at_offset(t)
    out = diff ** 2 / (2.0 * sigma ** 2)
    return float(out) if out.ndim == 0 else out


def additive_prdp_loss(noise: NoiseSpec, delta_r):
    """Tight PRDP policy of an additive mechanism: f(0) - f(delta) for the
    log-density kernel f.

    Generalized Gaussian: (delta/sigma)^p.  Exponential polylog:
    d [ln(delta/sigma + a)^p - ln(a)^p].  The Gaussian is not a PRDP
    mechanism (its log probability ratio is unbounded); use
    gaussian_zcdp_loss for its zero-concentrated guarantee.
    """
    arr = np.asarray(delta_r, dtype=float)
    if np.any(arr < 0.0):
        raise DomainError(f"sensitivity must be >= 0, got {delta_r}")
    if isinstance(noise, GenGaussianNoise):
        out = (arr / noise.sigma) ** noise.p
    elif isinstance(noise, ExpPolylogNoise):
        out = noise.d * (np.log(arr / noise.sigma + noise.a) ** noise.p
                         - math.log(noise.a) ** noise.p)
    elif isinstance(noise, GaussianNoise):
        raise FamilyError("the Gaussian mechanism has no finite PRDP policy; "
                          "use gaussian_zcdp_loss")
    else:
        raise FamilyError(f"not a noise spec: {noise!r}")
    return float(out) if arr.ndim == 0 else out


def prdp_to_przcdp(eps):
    """Tight PRzCDP loss implied by a PRDP loss: tanh(eps/2) * eps."""
    arr = np.asarray(eps, dtype=float)
    if np.any(arr < 0.0):
        raise DomainError(f"privacy loss must be >= 0, got {eps}")
    out = np.tanh(arr / 2.0) * arr
    return float(out) if arr.ndim == 0 else out


def gaussian_zcdp_loss(delta, sigma: float):
    """Per-record zCDP loss of the Gaussian mechanism: delta^2 / (2 sigma^2)."""
    if not sigma > 0.0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    arr = np.asarray(delta, dtype=float)
    if np.any(arr < 0.0):
        raise DomainError(f"sensitivity must be >= 0, got {delta}")
    out = arr ** 2 / (2.0 * sigma ** 2)
    return float(out) if arr.ndim == 0 else out


def unit_split_loss(value, threshold: float, rho: float):
    """Unit-splitting policy: rho times the squared split count."""
    if rho < 0.0:
        raise DomainError(f"rho must be >= 0, got {rho}")
    count = unit_split_count(value, threshold)
    out = rho * np.asarray(count, dtype=float) ** 2
    return float(out) if np.ndim(value) == 0 else out


def group_loss_coefficient(losses):
    """Group-privacy coefficient for a group of records: J * sum of the
    records' individual policy losses (the factor multiplying alpha)."""
    arr = np.asarray(losses, dtype=float)
    if arr.ndim != 1 or arr.size < 1:
        raise DomainError("losses must be a nonempty 1-d sequence")
    if np.any(arr < 0.0):
        raise DomainError(f"losses must be >= 0, got {losses}")
    return float(arr.size * np.sum(arr))


def bounded_transform_policy(t: TransformSpec, sigma: float, pair: DifferingPair):
    """Bounded-neighbor PRzCDP policy of the transformation mechanism on a
    global sum: |f(r + a) - f(r' + a)|^2 / (2 sigma^2)."""
    if not sigma > 0.0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    diff = apply_transform(t, pair.r_value) - apply_transform(t, pair.r_prime_value)
    return diff ** 2 / (2.0 * sigma ** 2)


def bounded_additive_prdp(noise: NoiseSpec, pair: DifferingPair):
    """Bounded-neighbor PRDP policy of an additive mechanism on a global sum:
    the PRDP loss at shift |r - r'|."""
    return additive_prdp_loss(noise, abs(pair.r_value - pair.r_prime_value))


# --- closed policy values -----------------------------------------------------

@dataclass(frozen=True)
class TransformSource:
    transform: TransformSpec
    sigma: float


@dataclass(frozen=True)
class AdditiveSource:
    noise: NoiseSpec

    def __post_init__(self):
        if isinstance(self.noise, GaussianNoise):
            raise ParameterError("Gaussian noise carries a zCDP guarantee; "
                                 "use GaussianSource")


@dataclass(frozen=True)
class GaussianSource:
    sigma: float


@dataclass(frozen=True)
class UnitSplitSource:
    rho: float
    threshold: float


@dataclass(frozen=True)
class ConstantSource:
    rho: float


_Source = Union[TransformSource, AdditiveSource, GaussianSource, UnitSplitSource,
                ConstantSource]

# Natural flavor of each source kind; additive heavy-tailed noise is the only
# PRDP-native source.
_SOURCE_FLAVOR = {
    TransformSource: PolicyFlavor.PRZCDP,
    AdditiveSource: PolicyFlavor.PRDP,
    GaussianSource: PolicyFlavor.PRZCDP,
    UnitSplitSource: PolicyFlavor.PRZCDP,
}


@dataclass(frozen=True)
class PolicySpec:
    """A publishable per-record policy function: flavor plus source parameters."""

    flavor: PolicyFlavor
    source: _Source

    def __post_init__(self):
        expected = _SOURCE_FLAVOR.get(type(self.source))
        if expected is not None and self.flavor is not expected:
            raise ParameterError(
                f"{type(self.source).__name__} carries a {expected.value} guarantee, "
                f"not {self.flavor.value}"
            )

    def native_loss(self, value):
        """Policy loss in the source's native flavor at the record value."""
        src = self.source
        if isinstance(src, TransformSource):
            return transform_policy_loss(src.transform, src.sigma,
                                         per_record_sensitivity_sum(value))
        if isinstance(src, AdditiveSource):
            return additive_prdp_loss(src.noise, per_record_sensitivity_sum(value))
        if isinstance(src, GaussianSource):
            return gaussian_zcdp_loss(per_record_sensitivity_sum(value), src.sigma)
        if isinstance(src, UnitSplitSource):
            return unit_split_loss(value, src.threshold, src.rho)
        arr = np.asarray(value, dtype=float)
        return src.rho if arr.ndim == 0 else np.full_like(arr, src.rho)

    def prdp_loss(self, value):
        """PRDP loss; defined only for PRDP-flavored policies."""
        if self.flavor is not PolicyFlavor.PRDP:
            raise FamilyError(f"{type(self.source).__name__} has no PRDP guarantee")
        return self.native_loss(value)

    def przcdp_loss(self, value):
        """PRzCDP loss; PRDP sources are tanh-tightened."""
        loss = self.native_loss(value)
        if self.flavor is PolicyFlavor.PRDP:
            return prdp_to_przcdp(loss)
        return loss


@dataclass(frozen=True)
class ComposedPolicy:
    """Pointwise sum (sequential) or max (parallel) of policy evaluations,
    taken in PRzCDP units."""

    op: str
    terms: tuple

    def __post_init__(self):
        if self.op not in ("sum", "max"):
            raise ParameterError(f"unknown composition op: {self.op!r}")
        if len(self.terms) < 1:
            raise ParameterError("composition requires at least one term")

    def przcdp_loss(self, value):
        parts = [term.przcdp_loss(value) for term in self.terms]
        if self.op == "sum":
            out = parts[0]
            for p in parts[1:]:
                out = out + p
            return out
        out = parts[0]
        for p in parts[1:]:
            out = np.maximum(out, p)
        return float(out) if np.ndim(out) == 0 else out

    def prdp_loss(self, value):
        raise FamilyError("composed policies are tracked in PRzCDP units")


PolicyEval = Union[PolicySpec, ComposedPolicy]


def compose_sequential(p1: PolicyEval, p2: PolicyEval) -> ComposedPolicy:
    """Sequential composition: the policies add pointwise (PRzCDP units)."""
    return _compose("sum", p1, p2)


def compose_parallel(p1: PolicyEval, p2: PolicyEval) -> ComposedPolicy:
    """Parallel composition over disjoint partitions: pointwise maximum
    (PRzCDP units).  For a shared policy this reduces to that policy."""
    return _compose("max", p1, p2)


def _compose(op: str, p1: PolicyEval, p2: PolicyEval) -> ComposedPolicy:
    terms = []
    for p in (p1, p2):
        if isinstance(p, ComposedPolicy) and p.op == op:
            terms.extend(p.terms)
        else:
            terms.append(p)
    return ComposedPolicy(op=op, terms=tuple(terms))


def policy_for_mechanism(mech: MechanismSpec) -> PolicySpec:
    """The publishable policy function of a mechanism for sum queries."""
    if isinstance(mech, TransformationMechanism):
        return PolicySpec(PolicyFlavor.PRZCDP,
                          TransformSource(mech.transform, mech.sigma))
    if isinstance(mech, AdditiveMechanism):
        if isinstance(mech.noise, GaussianNoise):
            return PolicySpec(PolicyFlavor.PRZCDP, GaussianSource(mech.noise.sigma))
        return PolicySpec(PolicyFlavor.PRDP, AdditiveSource(mech.noise))
    if isinstance(mech, UnitSplitGaussian):
        rho = gaussian_zcdp_loss(mech.threshold, mech.sigma)
        return PolicySpec(PolicyFlavor.PRZCDP,
                          UnitSplitSource(rho=rho, threshold=mech.threshold))
    raise ParameterError(f"not a mechanism spec: {mech!r}")


# --- JSON wire format ----------------------------------------------------------

def policy_to_json(policy: PolicyEval) -> dict:
    if isinstance(policy, ComposedPolicy):
        return {"policy": policy.op,
                "terms": [policy_to_json(t) for t in policy.terms]}
    src = policy.source
    if isinstance(src, TransformSource):
        return {"policy": "transform", "flavor": policy.flavor.value,
                "transform": transform_to_json(src.transform), "sigma": src.sigma}
    if isinstance(src, AdditiveSource):
        return {"policy": "additive", "flavor": policy.flavor.value,
                "noise": noise_to_json(src.noise)}
    if isinstance(src, GaussianSource):
        return {"policy": "gaussian", "flavor": policy.flavor.value,
                "sigma": src.sigma}
    if isinstance(src, UnitSplitSource):
        return {"policy": "unit_split", "flavor": policy.flavor.value,
                "rho": src.rho, "threshold": src.threshold}
    return {"policy": "constant", "flavor": policy.flavor.value, "rho": src.rho}


def policy_from_json(obj) -> PolicyEval:
    if isinstance(obj, str):
        obj = json.loads(obj)
    kind = obj.get("policy")
    if kind in ("sum", "max"):
        return ComposedPolicy(op=kind,
                              terms=tuple(policy_from_json(t) for t in obj["terms"]))
    flavor = PolicyFlavor(obj.get("flavor", "przcdp"))
    if kind == "transform":
        src = TransformSource(transform_from_json(obj["transform"]),
                              float(obj["sigma"]))
    elif kind == "additive":
        src = AdditiveSource(noise_from_json(obj["noise"]))
    elif kind == "gaussian":
        src = GaussianSource(float(obj["sigma"]))
    elif kind == "unit_split":
        src = UnitSplitSource(rho=float(obj["rho"]), threshold=float(obj["threshold"]))
    elif kind == "constant":
        src = ConstantSource(rho=float(obj["rho"]))
    else:
        raise ParameterError(f"unknown policy kind: {kind!r}")
    return PolicySpec(flavor=flavor, source=src)
