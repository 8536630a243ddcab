"""Tests for prediction intervals of both mechanism families."""

import math

import numpy as np
import pytest

from slowdp.bounds import (
    PredictionInterval,
    additive_prediction_interval,
    transform_prediction_interval,
)
from slowdp.distributions import (
    ExpPolylogNoise,
    GaussianNoise,
    GenGaussianNoise,
    RngStream,
    noise_sample,
)
from slowdp.errors import DomainError
from slowdp.mechanisms import transformation_privatize
from slowdp.transform import (
    EstimatorKind,
    EstimatorSpec,
    TransformKind,
    TransformSpec,
)

E = math.e
MEAN = EstimatorSpec(EstimatorKind.MEAN_UNBIASED)
MEDIAN = EstimatorSpec(EstimatorKind.MEDIAN_UNBIASED)
NAIVE = EstimatorSpec(EstimatorKind.NAIVE_INVERSE)
SQRT1 = TransformSpec(TransformKind.KTH_ROOT, offset_a=1.0, k=2)
LOG1 = TransformSpec(TransformKind.LOG, offset_a=1.0)


class TestTransformIntervals:
    def test_log_golden(self):
        iv = transform_prediction_interval(LOG1, 1.0, MEAN, 1000.0, 0.95)
        assert iv.lo == pytest.approx(85.0, abs=1.0)
        assert iv.hi == pytest.approx(4309.0, abs=1.0)

    def test_sqrt_golden(self):
        iv = transform_prediction_interval(SQRT1, 1.0, MEAN, 1000.0, 0.95)
        assert iv.lo == pytest.approx(879.0, abs=1.0)
        assert iv.hi == pytest.approx(1127.0, abs=1.0)

    def test_sqrt_interior_minimum_when_zero_in_range(self):
        # when 0 falls inside X the minimum of x^2 - sigma^2 - a is interior
        sigma, a = 1.0, 1.0
        iv = transform_prediction_interval(SQRT1, sigma, MEAN, 0.0, 0.95)
        assert iv.lo == pytest.approx(-sigma ** 2 - a, rel=1e-12)

    def test_fourth_root_interior_extrema(self):
        # He_3 roots at 0, +-sqrt(3): all interior candidates are evaluated
        t = TransformSpec(TransformKind.KTH_ROOT, offset_a=0.0, k=4)
        sigma = 1.0
        iv = transform_prediction_interval(t, sigma, MEAN, 1.0, 0.99)
        # global minimum of v^4 - 6 v^2 s^2 + 3 s^4 is at v^2 = 3 s^2: -6 s^4
        assert iv.lo == pytest.approx(-6.0 * sigma ** 4, rel=1e-10)

    def test_asymmetry_of_log_interval(self):
        iv = transform_prediction_interval(LOG1, 1.0, MEAN, 1000.0, 0.95)
        assert (iv.hi - 1000.0) > (1000.0 - iv.lo)

    def test_log_endpoints_linear_in_q_plus_a(self):
        ratios = []
        for q in (100.0, 1000.0, 50_000.0):
            iv = transform_prediction_interval(LOG1, 0.5, MEAN, q, 0.9)
            ratios.append(((iv.lo + 1.0) / (q + 1.0), (iv.hi + 1.0) / (q + 1.0)))
        lo_r, hi_r = zip(*ratios)
        np.testing.assert_allclose(lo_r, lo_r[0], rtol=1e-12)
        np.testing.assert_allclose(hi_r, hi_r[0], rtol=1e-12)

    def test_interval_collapses_as_p_shrinks(self):
        widths = [transform_prediction_interval(LOG1, 1.0, MEAN, 1000.0, p).width
                  for p in (0.99, 0.95, 0.8, 0.5, 0.1, 1e-6)]
        assert all(w1 >= w2 for w1, w2 in zip(widths, widths[1:]))
        # the degenerate limit pinches onto g(f(q+a))
        tiny = transform_prediction_interval(LOG1, 1.0, MEAN, 1000.0, 1e-12)
        center = 1001.0 * math.exp(-0.5) - 1.0
        assert tiny.lo == pytest.approx(center, rel=1e-9)
        assert tiny.hi == pytest.approx(center, rel=1e-9)

    @pytest.mark.parametrize("e", [MEAN, MEDIAN, NAIVE], ids=lambda e: e.kind.value)
    @pytest.mark.parametrize("t", [SQRT1, LOG1,
                                   TransformSpec(TransformKind.KTH_ROOT, k=4),
                                   TransformSpec(TransformKind.IDENTITY)],
                             ids=lambda t: f"{t.kind.value}{t.k if t.kind.value=='kth_root' else ''}")
    def test_empirical_coverage(self, t, e):
        q, p, sigma, n = 500.0, 0.9, 1.0, 100_000
        iv = transform_prediction_interval(t, sigma, e, q, p)
        out = transformation_privatize(q, t, sigma, e, RngStream(17, 3), size=n)
        covered = np.mean((out >= iv.lo - 1e-12) & (out <= iv.hi + 1e-12))
        assert covered == pytest.approx(p, abs=3.5 * math.sqrt(p * (1 - p) / n))

    def test_domain(self):
        with pytest.raises(DomainError):
            transform_prediction_interval(LOG1, 1.0, MEAN, 10.0, 0.0)
        with pytest.raises(DomainError):
            transform_prediction_interval(LOG1, 0.0, MEAN, 10.0, 0.5)


class TestAdditiveIntervals:
    def test_exp_polylog_golden(self):
        iv = additive_prediction_interval(
            ExpPolylogNoise(sigma=1.0, a=E, d=1.0, p=2.0), 0.0, 0.95)
        assert iv.hi == pytest.approx(5.418, abs=0.01)
        assert iv.lo == pytest.approx(-5.418, abs=0.01)

    def test_gen_gaussian_half_p_correct_width(self):
        # see the decisions ledger: the correct 97.5% point is 22.504 sigma,
        # not the published 0.963 sigma
        iv = additive_prediction_interval(GenGaussianNoise(sigma=1.0, p=0.5), 0.0, 0.95)
        assert iv.hi == pytest.approx(22.5042505688, abs=1e-7)

    @pytest.mark.parametrize("noise", [
        GaussianNoise(sigma=2.0),
        GenGaussianNoise(sigma=1.0, p=0.5),
        ExpPolylogNoise(sigma=1.0, a=E, d=1.0, p=2.0),
        ExpPolylogNoise(sigma=0.708, a=3.0, d=4.0, p=1.0),
    ], ids=str)
    def test_midpoint_is_query(self, noise):
        for q in (-5.0, 0.0, 123.0):
            iv = additive_prediction_interval(noise, q, 0.9)
            assert 0.5 * (iv.lo + iv.hi) == pytest.approx(q, abs=1e-9 * noise.sigma)

    @pytest.mark.parametrize("noise", [
        GaussianNoise(sigma=2.0),
        GenGaussianNoise(sigma=1.0, p=0.5),
        ExpPolylogNoise(sigma=1.0, a=E, d=1.0, p=2.0),
    ], ids=str)
    def test_empirical_coverage(self, noise):
        q, p, n = 42.0, 0.95, 100_000
        iv = additive_prediction_interval(noise, q, p)
        draws = q + noise_sample(noise, RngStream(23, 1), size=n)
        covered = np.mean((draws >= iv.lo) & (draws <= iv.hi))
        assert covered == pytest.approx(p, abs=3.5 * math.sqrt(p * (1 - p) / n))

    def test_width_monotone_in_p(self):
        noise = ExpPolylogNoise(sigma=1.0, a=E, d=1.0, p=2.0)
        widths = [additive_prediction_interval(noise, 0.0, p).width
                  for p in (0.99, 0.9, 0.5, 0.1)]
        assert all(w1 >= w2 for w1, w2 in zip(widths, widths[1:]))


class TestPredictionIntervalType:
    def test_validation(self):
        with pytest.raises(DomainError):
            PredictionInterval(lo=2.0, hi=1.0, coverage=0.5)
        with pytest.raises(DomainError):
            PredictionInterval(lo=0.0, hi=1.0, coverage=1.5)

    def test_contains(self):
        iv = PredictionInterval(lo=-1.0, hi=1.0, coverage=0.5)
        assert iv.contains(0.0) and not iv.contains(2.0)
