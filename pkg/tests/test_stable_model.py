import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from stablecond import RngStream, StableParams, validate_params
from stablecond.errors import CauchyAsymmetric, DomainError, OneSidedJumps, OutOfRange
from stablecond.stable_model import (
    cms_transform,
    levy_density,
    sample_increment,
    sampler_scale,
    skewness_from_rho,
)

from conftest import admissible


class TestValidateParams:
    def test_symmetric_case(self):
        p = validate_params(1.5, 0.5)
        assert p.ar == p.arh == 0.75

    def test_one_sided_boundary(self):
        with pytest.raises(OneSidedJumps):
            validate_params(1.5, 2 / 3)

    def test_cauchy_must_be_symmetric(self):
        with pytest.raises(CauchyAsymmetric):
            validate_params(1.0, 0.6)
        assert validate_params(1.0, 0.5).rho == 0.5

    @pytest.mark.parametrize("alpha", [0.0, 2.0, -1.0, 2.5, float("nan")])
    def test_alpha_range(self, alpha):
        with pytest.raises(OutOfRange):
            validate_params(alpha, 0.5)

    @pytest.mark.parametrize("alpha,rho", [(0.5, 0.0), (0.5, 1.0), (1.5, 1 / 3), (1.5, 0.7),
                                           (1.2, 0.1)])
    def test_rho_boundary(self, alpha, rho):
        with pytest.raises(OneSidedJumps):
            validate_params(alpha, rho)

    def test_errors_are_value_errors(self):
        with pytest.raises(ValueError):
            validate_params(3.0, 0.5)

    @given(st.floats(0.01, 1.99).filter(lambda a: abs(a - 1) > 1e-3), st.floats(0.01, 0.99))
    def test_invariants_and_idempotence(self, alpha, u):
        p = validate_params(alpha, admissible(alpha, u))
        assert p.rho + p.rho_hat == 1.0
        assert 0 < p.ar < 1 and 0 < p.arh < 1
        assert validate_params(p.alpha, p.rho) == p

    def test_swap_twice_is_identity(self):
        p = validate_params(0.5, 0.3)
        assert p.swapped().swapped() == p
        assert p.swapped().rho == pytest.approx(0.7)


class TestLevyDensity:
    def test_value(self):
        p = validate_params(0.5, 0.5)
        assert levy_density(p, 1.0) == pytest.approx(math.gamma(1.5) * math.sin(math.pi / 4) / math.pi,
                                                     rel=1e-14)
        assert levy_density(p, 1.0) == pytest.approx(0.19947, abs=1e-5)

    def test_negative_side_uses_rho_hat(self):
        p = validate_params(0.5, 0.3)
        c = math.gamma(1.5) / math.pi
        assert levy_density(p, -2.0) == pytest.approx(c * math.sin(math.pi * 0.35) * 2 ** -1.5)
        assert levy_density(p, 2.0) == pytest.approx(c * math.sin(math.pi * 0.15) * 2 ** -1.5)

    @pytest.mark.parametrize("x", [0.3, 1.0, 7.0])
    def test_symmetry_and_scaling(self, x):
        p = validate_params(1.5, 0.5)
        assert levy_density(p, x) == pytest.approx(levy_density(p, -x), rel=1e-15)
        assert levy_density(p, 2 * x) == pytest.approx(2 ** -2.5 * levy_density(p, x), rel=1e-13)

    def test_zero_rejected(self):
        with pytest.raises(DomainError):
            levy_density(validate_params(1.5, 0.5), 0.0)

    @pytest.mark.parametrize("ar", [(0.5, 0.3), (1.5, 0.45), (1.9, 0.5)])
    def test_integrability(self, ar):
        p = validate_params(*ar)
        f = lambda x: min(1.0, x * x) * (levy_density(p, x) + levy_density(p, -x))
        val = sum(integrate.quad(f, a, b, limit=200)[0]
                  for a, b in [(1e-6, 1.0), (1.0, 1e3), (1e3, 1e6)])
        assert np.isfinite(val) and val > 0


class TestSkewness:
    def test_symmetric(self):
        for a in (0.5, 1.0, 1.5):
            assert skewness_from_rho(validate_params(a, 0.5)) == 0.0

    def test_value(self):
        assert skewness_from_rho(validate_params(0.5, 0.3)) == pytest.approx(
            math.tan(-0.1 * math.pi), rel=1e-13)
        assert skewness_from_rho(validate_params(0.5, 0.3)) == pytest.approx(-0.32492, abs=1e-5)

    @pytest.mark.parametrize("ar", [(0.5, 0.3), (0.8, 0.7), (1.5, 0.45), (1.7, 0.55)])
    def test_reproduces_rho_via_scipy(self, ar):
        # scipy's S1 parametrisation with the mapped beta has P(X >= 0) = rho
        p = validate_params(*ar)
        beta = skewness_from_rho(p)
        cdf0 = stats.levy_stable.cdf(0.0, p.alpha, beta)
        assert 1 - cdf0 == pytest.approx(p.rho, abs=2e-4)


class TestSampling:
    def test_positivity_frequency(self):
        p = validate_params(1.5, 0.45)
        x = sample_increment(p, 1.0, RngStream(1), size=1_000_000)
        f = np.mean(x >= 0)
        assert abs(f - p.rho) < 3 * math.sqrt(p.rho * p.rho_hat / x.size)

    def test_symmetric_median(self):
        p = validate_params(0.7, 0.5)
        x = sample_increment(p, 1.0, RngStream(2), size=1_000_000)
        # SE of the median from the density at zero
        from stablecond.stable_law import stable_pdf
        se = 1 / (2 * stable_pdf(p, 0.0) * math.sqrt(x.size))
        assert abs(np.median(x)) < 3 * se

    @pytest.mark.parametrize("ar", [(0.5, 0.3), (1.5, 0.45)])
    def test_scaling_property(self, ar):
        p = validate_params(*ar)
        c = 2.0
        a = c * sample_increment(p, 0.3, RngStream(3), size=100_000)
        b = sample_increment(p, c ** p.alpha * 0.3, RngStream(4), size=100_000)
        assert stats.ks_2samp(a, b).pvalue > 1e-3

    def test_sum_of_increments(self):
        p = validate_params(1.2, 0.45)
        n = 4
        a = sample_increment(p, 0.25, RngStream(5), size=(100_000, n)).sum(axis=1)
        b = sample_increment(p, 1.0, RngStream(6), size=100_000)
        assert stats.ks_2samp(a, b).pvalue > 1e-3

    @pytest.mark.parametrize("ar", [(0.5, 0.3), (1.0, 0.5), (1.5, 0.45)])
    def test_law_matches_scipy(self, ar):
        p = validate_params(*ar)
        x = sample_increment(p, 1.0, RngStream(7), size=50_000)
        beta = skewness_from_rho(p)
        cdf = lambda v: stats.levy_stable.cdf(v, p.alpha, beta, scale=sampler_scale(p))
        qs = np.quantile(x, [0.1, 0.3, 0.5, 0.7, 0.9])
        # the empirical cdf at its own quantiles matches the reference cdf
        ref = np.array([cdf(q) for q in qs])
        assert np.max(np.abs(ref - [0.1, 0.3, 0.5, 0.7, 0.9])) < 0.01

    def test_determinism(self):
        p = validate_params(1.5, 0.5)
        a = sample_increment(p, 0.1, RngStream(9, 3), size=10)
        b = sample_increment(p, 0.1, RngStream(9, 3), size=10)
        c = sample_increment(p, 0.1, RngStream(9, 4), size=10)
        assert np.array_equal(a, b) and not np.array_equal(a, c)

    def test_cms_cauchy(self):
        p = validate_params(1.0, 0.5)
        assert cms_transform(p, 0.3, 1.0) == pytest.approx(math.tan(0.3))


class TestRngStream:
    def test_children_distinct(self):
        r = RngStream(0)
        ids = {r.child(k).stream_id for k in range(100)} | {r.stream_id}
        assert len(ids) == 101

    def test_fresh_restarts(self):
        r = RngStream(4, 2)
        a = r.generator.random(3)
        assert np.array_equal(r.fresh().generator.random(3), a)

    def test_negative_seed(self):
        with pytest.raises(ValueError):
            RngStream(-1)
