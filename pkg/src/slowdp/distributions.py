"""Additive noise families: Gaussian, generalized Gaussian, and the
exponential polylogarithmic distribution.

Each family supports density, CDF, quantile, variance, and inverse-CDF
sampling.  Closed forms cover the Gaussian, generalized Gaussian with
p in {1, 1/2}, and exponential polylog with p in {1, 2}; other parameter
settings fall back to the incomplete Fox-Wright series and bisection of
the CDF.  All evaluators accept scalars or numpy arrays.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Union

import numpy as np
from scipy.special import log_ndtr

from . import specfun
from .errors import DomainError, FamilyError, MomentError, ParameterError

__all__ = [
    "GaussianNoise",
    "GenGaussianNoise",
    "ExpPolylogNoise",
    "NoiseSpec",
    "RngStream",
    "noise_pdf",
    "noise_cdf",
    "noise_quantile",
    "noise_sample",
    "noise_variance",
    "noise_to_json",
    "noise_from_json",
]

# Bracket half-width, in units of sigma, for quantile bisection of the
# families without a closed-form quantile.  Heavy tails defeat Newton far
# from the median, so the bracket is generous and shrunk geometrically.
_BISECT_SPAN = 1e12
_BISECT_REL_TOL = 1e-10


@dataclass(frozen=True)
class GaussianNoise:
    """Mean-zero Gaussian noise with scale ``sigma``."""

    sigma: float

    def __post_init__(self):
        if not self.sigma > 0.0:
            raise ParameterError(f"sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class GenGaussianNoise:
    """Generalized Gaussian noise, density ~ exp(-(|z|/sigma)^p), 0 < p <= 1.

    The restriction p <= 1 keeps the negative log-density convex in |z|,
    which is what the per-record privacy analysis requires.
    """

    sigma: float
    p: float

    def __post_init__(self):
        if not self.sigma > 0.0:
            raise ParameterError(f"sigma must be positive, got {self.sigma}")
        if not 0.0 < self.p <= 1.0:
            raise ParameterError(f"p must lie in (0, 1], got {self.p}")


@dataclass(frozen=True)
class ExpPolylogNoise:
    """Exponential polylogarithmic noise, density ~ exp(-d ln(|z|/sigma + a)^p).

    Requires a >= e^(p-1) (convexity of the log-density) and either
    (p > 1, d > 0) or (p = 1, d > 1) for the density to normalize.
    The variance additionally exists only for d > 3 when p = 1.
    """

    sigma: float
    a: float
    d: float
    p: float

    def __post_init__(self):
        if not self.sigma > 0.0:
            raise ParameterError(f"sigma must be positive, got {self.sigma}")
        if not self.p >= 1.0:
            raise ParameterError(f"p must be >= 1, got {self.p}")
        if self.a < math.exp(self.p - 1.0) - 1e-12:
            raise ParameterError(
                f"a must be >= e^(p-1) = {math.exp(self.p - 1.0):.6g}, got {self.a}"
            )
        if self.p == 1.0:
            if not self.d > 1.0:
                raise ParameterError(f"p = 1 requires d > 1, got d = {self.d}")
        elif not self.d > 0.0:
            raise ParameterError(f"d must be positive, got {self.d}")


NoiseSpec = Union[GaussianNoise, GenGaussianNoise, ExpPolylogNoise]


@dataclass
class RngStream:
    """A reproducible, splittable uniform stream.

    Identical (seed, stream_id) pairs reproduce identical draw sequences;
    distinct stream ids give independent streams for concurrent use.  Draws
    lie strictly inside (0, 1) so quantile transforms stay finite.
    """

    seed: int
    stream_id: int = 0
    _gen: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mask = (1 << 64) - 1
        seq = np.random.SeedSequence([self.seed & mask, self.stream_id & mask])
        self._gen = np.random.default_rng(seq)

    def uniform(self, size=None):
        """Uniform variates on the open interval (0, 1)."""
        k = self._gen.integers(0, 1 << 53, size=size)
        return (np.asarray(k, dtype=float) + 0.5) / float(1 << 53) if size is not None \
            else (float(k) + 0.5) / float(1 << 53)


def _sign_abs(z):
    arr = np.asarray(z, dtype=float)
    return np.sign(arr), np.abs(arr), arr.ndim == 0


def _maybe_float(x, scalar):
    return float(x) if scalar else x


# --- exponential polylog helpers -------------------------------------------

def _kappa_arg(x, y, d):
    """Argument of the normal CDF in the p=2 closed forms:
    (ln x - y/d) / (2d)^(-1/2)."""
    return (np.log(x) - y / d) * math.sqrt(2.0 * d)


def _kappa(x, y, d):
    return specfun.std_normal_cdf(_kappa_arg(x, y, d))


@lru_cache(maxsize=256)
def _ep_normalizer(p: float, a: float, d: float) -> float:
    """Upper Fox-Wright normalizer for the general-p exponential polylog."""
    return specfun.fox_wright_upper(p, d * math.log(a) ** p, d ** (-1.0 / p))


def _ep_pdf(noise: ExpPolylogNoise, z):
    sigma, a, d, p = noise.sigma, noise.a, noise.d, noise.p
    _, az, scalar = _sign_abs(z)
    shifted = az / sigma + a
    if p == 1.0:
        out = (d - 1.0) / (2.0 * sigma) * a ** (d - 1.0) * shifted ** (-d)
    elif p == 2.0:
        norm = 2.0 * math.exp(1.0 / (4.0 * d)) * sigma * math.sqrt(math.pi) \
            * (1.0 - _kappa(a, 0.5, d))
        out = math.sqrt(d) * np.exp(-d * np.log(shifted) ** 2) / norm
    else:
        psi = _ep_normalizer(p, a, d)
        out = p * d ** (1.0 / p) / (2.0 * sigma * psi) * np.exp(-d * np.log(shifted) ** p)
    return _maybe_float(out, scalar)


def _ep_cdf(noise: ExpPolylogNoise, z):
    sigma, a, d, p = noise.sigma, noise.a, noise.d, noise.p
    sgn, az, scalar = _sign_abs(z)
    shifted = az / sigma + a
    if p == 1.0:
        half = 1.0 - (az / (sigma * a) + 1.0) ** (1.0 - d)
    elif p == 2.0:
        k0 = _kappa(a, 0.5, d)
        half = (_kappa(shifted, 0.5, d) - k0) / (1.0 - k0)
    else:
        c = d ** (-1.0 / p)
        psi = _ep_normalizer(p, a, d)
        lower0 = specfun.fox_wright_lower(p, d * math.log(a) ** p, c)
        lower = specfun.fox_wright_lower(p, d * np.log(shifted) ** p, c)
        half = (lower - lower0) / psi
    return _maybe_float(0.5 + 0.5 * sgn * half, scalar)


def _ep_quantile(noise: ExpPolylogNoise, u):
    sigma, a, d, p = noise.sigma, noise.a, noise.d, noise.p
    arr = np.asarray(u, dtype=float)
    scalar = arr.ndim == 0
    sgn = np.sign(arr - 0.5)
    t = 2.0 * np.abs(arr - 0.5)
    if p == 1.0:
        out = sigma * a * sgn * ((1.0 - t) ** (1.0 / (1.0 - d)) - 1.0)
    elif p == 2.0:
        k0 = _kappa(a, 0.5, d)
        inner = t * (1.0 - k0) + k0
        mag = np.exp(
            specfun.std_normal_quantile(inner) / math.sqrt(2.0 * d) + 1.0 / (2.0 * d)
        ) - a
        out = sigma * sgn * mag
    else:
        return _bisect_quantile(noise, arr, scalar)
    return _maybe_float(out, scalar)


def _ep_variance(noise: ExpPolylogNoise) -> float:
    sigma, a, d, p = noise.sigma, noise.a, noise.d, noise.p
    if p == 1.0:
        if not d > 3.0:
            raise MomentError(
                f"exp polylog variance requires d > 3 when p = 1, got d = {d}"
            )
        return sigma ** 2 * a ** 2 * (d - 1.0) * (
            1.0 / (d - 3.0) - 2.0 / (d - 2.0) + 1.0 / (d - 1.0)
        )
    if p == 2.0:
        # Table-form variance rearranged for stability: with the half-density
        # of u = ln(|z|/sigma + a), var = sigma^2 (a^2 - 2a E[e^u] + E[e^2u]),
        # and each E[e^mu] = exp(m^2/(4d)) * sf(arg(m/2)) / sf(arg(1/2))
        # evaluates in log space so extreme d neither overflows nor cancels.
        ls = log_ndtr(-_kappa_arg(a, 0.5, d))
        l_r1 = 3.0 / (4.0 * d) + log_ndtr(-_kappa_arg(a, 1.0, d)) - ls
        l_r2 = 2.0 / d + log_ndtr(-_kappa_arg(a, 1.5, d)) - ls
        rest = a * a * math.exp(min(-l_r2, 700.0)) - 2.0 * a * math.exp(min(l_r1 - l_r2, 700.0))
        rest = max(rest, -1.0 + 1e-16)
        log_var = 2.0 * math.log(sigma) + l_r2 + math.log1p(rest)
        return math.inf if log_var > 709.0 else math.exp(log_var)
    # General p: k=1 case of the even-moment series.
    x0 = d * math.log(a) ** p
    c = d ** (-1.0 / p)
    psi1 = _ep_normalizer(p, a, d)
    psi2 = specfun.fox_wright_upper(p, x0, 2.0 * c)
    psi3 = specfun.fox_wright_upper(p, x0, 3.0 * c)
    return sigma ** 2 * (a * a * psi1 - 2.0 * a * psi2 + psi3) / psi1


# --- generalized Gaussian helpers -------------------------------------------

def _gg_pdf(noise: GenGaussianNoise, z):
    sigma, p = noise.sigma, noise.p
    _, az, scalar = _sign_abs(z)
    norm = p / (2.0 * sigma * math.exp(specfun.ln_gamma(1.0 / p)))
    return _maybe_float(norm * np.exp(-((az / sigma) ** p)), scalar)


def _gg_cdf(noise: GenGaussianNoise, z):
    sigma, p = noise.sigma, noise.p
    sgn, az, scalar = _sign_abs(z)
    half = specfun.reg_gamma_lower(1.0 / p, (az / sigma) ** p)
    return _maybe_float(0.5 + 0.5 * sgn * half, scalar)


def _gamma2_tail_inverse(y):
    """Nonnegative solution t of (1 + t) e^(-t) = y for y in (0, 1].

    This is the upper tail inverse of the Gamma(2) distribution (equivalently
    the value -W_{-1}(-y/e) - 1 of the secondary Lambert branch).  Note the
    equation also has a root in (-1, 0); the principal Lambert branch picks
    that one, which is NOT the quantile.  Newton iteration on
    g(t) = log(1+t) - t - log(y).
    """
    y = np.asarray(y, dtype=float)
    big = -np.log(np.maximum(y, 1e-300))
    s = np.sqrt(2.0 * np.maximum(1.0 - y, 0.0))
    t = np.where(y > 0.9, s * (1.0 + s / 3.0), big + np.log1p(big))
    for _ in range(80):
        g = np.log1p(t) - t - np.log(y)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = g * (1.0 + t) / t
        step = np.where(np.isfinite(step), step, 0.0)
        t = np.maximum(t + step, 0.0)
        if np.all(np.abs(step) <= 1e-13 * (1.0 + t)):
            break
    return t


def _gg_quantile(noise: GenGaussianNoise, u):
    sigma, p = noise.sigma, noise.p
    arr = np.asarray(u, dtype=float)
    scalar = arr.ndim == 0
    sgn = np.sign(arr - 0.5)
    t = 2.0 * np.abs(arr - 0.5)
    if p == 1.0:
        out = -sigma * sgn * np.log1p(-t)
    elif p == 0.5:
        # Inverting P(2, sqrt(|z|/sigma)) = t means solving
        # (1 + r) e^(-r) = 1 - t for the nonnegative root r, then |z| = sigma r^2.
        r = _gamma2_tail_inverse(1.0 - t)
        out = sigma * sgn * r ** 2
    else:
        return _bisect_quantile(noise, arr, scalar)
    return _maybe_float(out, scalar)


def _gg_variance(noise: GenGaussianNoise) -> float:
    sigma, p = noise.sigma, noise.p
    return sigma ** 2 * math.exp(specfun.ln_gamma(3.0 / p) - specfun.ln_gamma(1.0 / p))


# --- quantile bisection for families without closed forms -------------------

def _bisect_quantile(noise, u: np.ndarray, scalar: bool):
    """Quantile by bisecting the CDF on the upper half line; symmetry supplies
    the sign, so the median is exactly 0 and the result is odd in u - 1/2."""
    sigma = noise.sigma
    abs_tol = _BISECT_REL_TOL * sigma
    uu = u if u.shape else u.reshape(1)
    sgn = np.sign(uu - 0.5)
    target = 0.5 + np.abs(uu - 0.5)
    lo = np.zeros_like(target)
    hi = np.full_like(target, _BISECT_SPAN * sigma)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        go_up = noise_cdf(noise, mid) < target
        lo = np.where(go_up, mid, lo)
        hi = np.where(go_up, hi, mid)
        if np.all(hi - lo <= abs_tol):
            break
    out = sgn * 0.5 * (lo + hi)
    return float(out[0]) if scalar else out.reshape(u.shape)


# --- public dispatchers ------------------------------------------------------

def noise_pdf(noise: NoiseSpec, z):
    """Density of the noise distribution at z (scalar or array)."""
    if isinstance(noise, GaussianNoise):
        _, az, scalar = _sign_abs(z)
        out = np.exp(-0.5 * (az / noise.sigma) ** 2) / (noise.sigma * math.sqrt(2 * math.pi))
        return _maybe_float(out, scalar)
    if isinstance(noise, GenGaussianNoise):
        return _gg_pdf(noise, z)
    if isinstance(noise, ExpPolylogNoise):
        return _ep_pdf(noise, z)
    raise FamilyError(f"not a noise spec: {noise!r}")


def noise_cdf(noise: NoiseSpec, z):
    """Cumulative distribution function at z (scalar or array)."""
    if isinstance(noise, GaussianNoise):
        arr = np.asarray(z, dtype=float)
        out = specfun.std_normal_cdf(arr / noise.sigma)
        return out
    if isinstance(noise, GenGaussianNoise):
        return _gg_cdf(noise, z)
    if isinstance(noise, ExpPolylogNoise):
        return _ep_cdf(noise, z)
    raise FamilyError(f"not a noise spec: {noise!r}")


def noise_quantile(noise: NoiseSpec, u):
    """Quantile (inverse CDF) at probability u in (0, 1)."""
    arr = np.asarray(u, dtype=float)
    if np.any(arr <= 0.0) or np.any(arr >= 1.0) or np.any(np.isnan(arr)):
        raise DomainError(f"quantile argument must lie in (0, 1), got {u}")
    if isinstance(noise, GaussianNoise):
        out = noise.sigma * specfun.std_normal_quantile(arr)
        return float(out) if arr.ndim == 0 else out
    if isinstance(noise, GenGaussianNoise):
        return _gg_quantile(noise, arr)
    if isinstance(noise, ExpPolylogNoise):
        return _ep_quantile(noise, arr)
    raise FamilyError(f"not a noise spec: {noise!r}")


def noise_sample(noise: NoiseSpec, rng: RngStream, size=None):
    """Draw from the noise distribution by inverse-CDF sampling.

    Returns a float when size is None, else an array of the given shape.
    """
    return noise_quantile(noise, rng.uniform(size=size))


def noise_variance(noise: NoiseSpec) -> float:
    """Variance of the noise distribution.

    Raises MomentError when the second moment does not exist
    (exp polylog with p = 1 requires d > 3).
    """
    if isinstance(noise, GaussianNoise):
        return noise.sigma ** 2
    if isinstance(noise, GenGaussianNoise):
        return _gg_variance(noise)
    if isinstance(noise, ExpPolylogNoise):
        return _ep_variance(noise)
    raise FamilyError(f"not a noise spec: {noise!r}")


# --- JSON wire format --------------------------------------------------------

_FAMILY_NAMES = {
    GaussianNoise: "gaussian",
    GenGaussianNoise: "gen_gaussian",
    ExpPolylogNoise: "exp_polylog",
}


def noise_to_json(noise: NoiseSpec) -> dict:
    """Serialize a noise spec to the CLI's JSON object form."""
    out = {"family": _FAMILY_NAMES[type(noise)], "sigma": noise.sigma}
    if isinstance(noise, GenGaussianNoise):
        out["p"] = noise.p
    elif isinstance(noise, ExpPolylogNoise):
        out.update({"p": noise.p, "a": noise.a, "d": noise.d})
    return out


def noise_from_json(obj) -> NoiseSpec:
    """Parse a noise spec from a JSON object (or JSON text)."""
    if isinstance(obj, str):
        obj = json.loads(obj)
    if not isinstance(obj, dict):
        raise ParameterError(f"malformed noise spec: {obj!r}")
    family = obj.get("family")
    try:
        if family == "gaussian":
            return GaussianNoise(sigma=float(obj["sigma"]))
        if family == "gen_gaussian":
            return GenGaussianNoise(sigma=float(obj["sigma"]), p=float(obj["p"]))
        if family == "exp_polylog":
            return ExpPolylogNoise(sigma=float(obj["sigma"]), a=float(obj["a"]),
                                   d=float(obj["d"]), p=float(obj["p"]))
    except KeyError as exc:
        raise ParameterError(f"noise spec missing field {exc} in {obj!r}") from exc
    raise ParameterError(f"unknown noise family: {family!r}")
