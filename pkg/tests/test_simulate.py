"""Synthetic mixture benchmark: the generator, its true conditional
density/cdf oracles, and their mutual consistency.

The conditional law is w Normal(x1, 0.1^2) + (1-w) Normal(x1^4, 0.2^2)
with w = exp(-2 x1) and covariates uniform on the unit cube; only the
first covariate carries signal.
"""

import math

import numpy as np
import pytest
from scipy import integrate, stats

from sbartds import ConfigError
from sbartds.simulate import (
    DunsonDesign,
    dunson_true_cdf,
    dunson_true_density,
    gen_dunson,
)

# Mixture mean at x1 = 1/2: e^{-1} * 0.5 + (1 - e^{-1}) * 0.5^4.
MIXTURE_MEAN_AT_HALF = 0.22344725551250602


def _conditional_draws(rng, x1, n):
    """Direct draws from the documented conditional law at a fixed x1."""
    w = math.exp(-2.0 * x1)
    pick_first = rng.uniform(size=n) < w
    loc = np.where(pick_first, x1, x1**4)
    sd = np.where(pick_first, 0.1, 0.2)
    return loc + sd * rng.standard_normal(n)


class TestDunsonDesign:
    def test_valid_design(self):
        design = DunsonDesign(n=500, p=5, seed=3)
        assert design.n == 500
        assert design.p == 5

    def test_invalid_sizes_rejected(self):
        with pytest.raises(ConfigError):
            DunsonDesign(n=0, p=5)
        with pytest.raises(ConfigError):
            DunsonDesign(n=10, p=0)


class TestGenDunson:
    def test_shapes_and_covariate_range(self):
        rng = np.random.default_rng(0)
        X, y = gen_dunson(rng, DunsonDesign(n=400, p=7))
        assert X.shape == (400, 7)
        assert y.shape == (400,)
        assert np.all((X >= 0.0) & (X <= 1.0))

    def test_covariates_uniform(self):
        """Each covariate column is marginally Uniform(0, 1)."""
        rng = np.random.default_rng(1)
        X, _ = gen_dunson(rng, DunsonDesign(n=100_000, p=3))
        for j in range(3):
            stat = stats.kstest(X[:, j], "uniform").statistic
            assert stat < 0.01

    def test_probability_integral_transform_uniform(self):
        """Feeding every generated (x1, y) pair through the true conditional
        cdf yields Uniform(0,1) values; this ties the generator to the cdf
        oracle at all covariate values simultaneously."""
        rng = np.random.default_rng(2)
        X, y = gen_dunson(rng, DunsonDesign(n=1_000_000, p=2))
        pit = np.array(
            [float(dunson_true_cdf(x1, yi)) for x1, yi in zip(X[::5, 0], y[::5])]
        )
        stat = stats.kstest(pit, "uniform").statistic
        assert stat < 0.005

    def test_noise_covariates_independent_of_response(self):
        """Columns past the first carry no signal: empirical correlations
        stay within 4 / sqrt(N)."""
        rng = np.random.default_rng(3)
        n = 20_000
        X, y = gen_dunson(rng, DunsonDesign(n=n, p=6))
        for j in range(1, 6):
            assert abs(np.corrcoef(X[:, j], y)[0, 1]) < 4.0 / math.sqrt(n)

    def test_conditional_mean_at_half(self):
        """Empirical mean of conditional draws at x1 = 1/2 matches the
        analytic mixture mean within three Monte Carlo standard errors."""
        w = math.exp(-1.0)
        assert MIXTURE_MEAN_AT_HALF == pytest.approx(
            w * 0.5 + (1.0 - w) * 0.5**4, abs=1e-15
        )
        rng = np.random.default_rng(4)
        draws = _conditional_draws(rng, 0.5, 1_000_000)
        se = draws.std(ddof=1) / math.sqrt(len(draws))
        assert abs(draws.mean() - MIXTURE_MEAN_AT_HALF) < 3.0 * se

    def test_conditional_law_at_frozen_x(self):
        """Kolmogorov-Smirnov agreement between conditional draws at
        x1 = 0.3 and the cdf oracle."""
        rng = np.random.default_rng(5)
        draws = _conditional_draws(rng, 0.3, 1_000_000)
        stat = stats.kstest(draws, lambda y: dunson_true_cdf(0.3, y)).statistic
        assert stat < 0.005


class TestTrueDensity:
    def test_boundary_x_zero_is_narrow_normal(self):
        """At x1 = 0 the mixture weight is one: the law is Normal(0, 0.1^2)."""
        y = np.linspace(-0.6, 0.6, 301)
        assert np.allclose(
            dunson_true_density(0.0, y), stats.norm.pdf(y, 0.0, 0.1), atol=1e-12
        )
        assert np.allclose(
            dunson_true_cdf(0.0, y), stats.norm.cdf(y, 0.0, 0.1), atol=1e-12
        )

    def test_weights_at_x_one(self):
        """At x1 = 1 both components center at 1 and the first carries weight
        exp(-2)."""
        w = math.exp(-2.0)
        assert w == pytest.approx(0.1353352832366127, abs=1e-15)
        y = np.linspace(0.0, 2.0, 201)
        expected = w * stats.norm.pdf(y, 1.0, 0.1) + (1.0 - w) * stats.norm.pdf(
            y, 1.0, 0.2
        )
        assert np.allclose(dunson_true_density(1.0, y), expected, atol=1e-12)

    def test_integrates_to_one(self):
        """The density integrates to 1 over y for any covariate value."""
        for x1 in (0.0, 0.17, 0.5, 0.83, 1.0):
            total, _ = integrate.quad(
                lambda y: dunson_true_density(x1, y), -2.0, 3.0, limit=200
            )
            assert total == pytest.approx(1.0, abs=1e-8)

    def test_cdf_is_antiderivative_of_density(self):
        """Quadrature of the density between two points reproduces the cdf
        increment."""
        for x1 in (0.1, 0.45, 0.9):
            for lo, hi in ((-0.2, 0.3), (0.0, 1.2)):
                inc, _ = integrate.quad(
                    lambda y: dunson_true_density(x1, y), lo, hi, limit=200
                )
                expected = float(dunson_true_cdf(x1, hi) - dunson_true_cdf(x1, lo))
                assert inc == pytest.approx(expected, abs=1e-9)

    def test_nonnegative(self):
        y = np.linspace(-3.0, 3.0, 601)
        for x1 in (0.0, 0.33, 1.0):
            assert np.all(dunson_true_density(x1, y) >= 0.0)
