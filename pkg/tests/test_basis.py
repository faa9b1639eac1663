"""Random-Fourier response basis: spectral sampling, feature evaluation,
and the closed-form kernels the features approximate in expectation."""

import math

import numpy as np
import pytest

from sbartds import ConfigError, Kernel, basis_eval, kernel_cov, sample_basis
from sbartds.basis import KERNEL_FAMILIES, SQRT2

# Frozen closed-form correlations at separation d = 0.5 with the default
# length scale rho = 2/pi (so d/rho = pi/4).
SE_AT_HALF = 0.7346029443286334
MATERN1_AT_HALF = 0.45593812776599624
CAUCHY_AT_HALF = 0.6184864581588363


class TestKernelConfig:
    def test_defaults(self):
        k = Kernel()
        assert k.family == "se"
        assert k.rho == pytest.approx(2.0 / math.pi)

    def test_families_tuple(self):
        assert KERNEL_FAMILIES == ("se", "matern", "cauchy")

    def test_unknown_family(self):
        with pytest.raises(ConfigError):
            Kernel(family="brownian")

    def test_nonpositive_rho(self):
        with pytest.raises(ConfigError):
            Kernel(rho=0.0)

    def test_matern_needs_positive_nu(self):
        with pytest.raises(ConfigError):
            Kernel(family="matern", nu=-1.0)


class TestBasisEval:
    """B(y) = sqrt(2) cos(omega y + b)."""

    def test_amplitude(self):
        assert basis_eval(0.0, 0.0, 3.7) == pytest.approx(SQRT2)

    def test_phase_shift(self):
        assert basis_eval(1.0, math.pi / 2.0, 0.0) == pytest.approx(0.0, abs=1e-12)

    def test_vectorized_over_y(self):
        y = np.linspace(-2, 2, 11)
        out = basis_eval(0.8, 0.3, y)
        np.testing.assert_allclose(out, SQRT2 * np.cos(0.8 * y + 0.3))

    def test_zero_frequency_constant_in_y(self):
        """omega = 0 collapses the feature to a constant of y."""
        y = np.linspace(-5, 5, 9)
        out = basis_eval(0.0, 1.1, y)
        np.testing.assert_allclose(out, out[0])

    def test_bounded(self):
        rng = np.random.default_rng(7)
        y = rng.normal(size=1000)
        out = basis_eval(2.3, 0.9, y)
        assert np.all(np.abs(out) <= SQRT2 + 1e-12)


class TestKernelCov:
    """Closed forms, frozen at d = 0.5 and rho = 2/pi."""

    def test_se_frozen(self):
        assert kernel_cov(Kernel("se"), 0.5, 0.0) == pytest.approx(
            SE_AT_HALF, abs=1e-12
        )

    def test_matern1_frozen(self):
        k = Kernel("matern", nu=1.0)
        assert kernel_cov(k, 0.5, 0.0) == pytest.approx(MATERN1_AT_HALF, abs=1e-12)

    def test_matern1_general_branch_agrees(self):
        """The Bessel expression at nu=1 reduces to the exponential."""
        d = np.array([0.1, 0.5, 1.3])
        exact = np.exp(-d / (2.0 / math.pi))
        k = Kernel("matern", nu=1.0 + 1e-12)
        np.testing.assert_allclose(kernel_cov(k, d, 0.0), exact, rtol=1e-9)

    def test_cauchy_frozen(self):
        k = Kernel("cauchy")
        assert kernel_cov(k, 0.5, 0.0) == pytest.approx(CAUCHY_AT_HALF, abs=1e-12)

    @pytest.mark.parametrize("family", KERNEL_FAMILIES)
    def test_unit_at_zero(self, family):
        k = Kernel(family)
        assert kernel_cov(k, 1.7, 1.7) == pytest.approx(1.0)

    @pytest.mark.parametrize("family", KERNEL_FAMILIES)
    def test_symmetric_and_decaying(self, family):
        k = Kernel(family)
        d = np.linspace(0.0, 4.0, 41)
        vals = kernel_cov(k, d, 0.0)
        np.testing.assert_allclose(vals, kernel_cov(k, 0.0, d))
        assert np.all(np.diff(vals) <= 1e-12)

    def test_matern_fractional_nu_at_zero_distance(self):
        k = Kernel("matern", nu=1.5)
        assert kernel_cov(k, 0.0, 0.0) == 1.0
        vec = kernel_cov(k, np.array([0.0, 0.2]), 0.0)
        assert vec[0] == 1.0


class TestSpectralSampling:
    """Feature products must reproduce the kernel in expectation:
    E[B(y) B(y')] = delta(y - y') for omega from the spectral law."""

    def test_scalar_draw(self):
        rng = np.random.default_rng(0)
        omega, b = sample_basis(rng, Kernel())
        assert isinstance(omega, float) and isinstance(b, float)
        assert 0.0 <= b < 2.0 * math.pi

    def test_batch_shapes(self):
        rng = np.random.default_rng(0)
        omega, b = sample_basis(rng, Kernel(), size=64)
        assert omega.shape == (64,) and b.shape == (64,)

    @pytest.mark.parametrize("family", KERNEL_FAMILIES)
    def test_monte_carlo_matches_kernel(self, family):
        """10^5-draw feature-product average lands within 0.02 of the
        closed form at two separations."""
        k = Kernel(family, rho=0.8, nu=1.0)
        rng = np.random.default_rng(2024)
        omega, b = sample_basis(rng, k, size=100_000)
        for d in (0.3, 1.1):
            mc = np.mean(basis_eval(omega, b, 0.0) * basis_eval(omega, b, d))
            assert mc == pytest.approx(kernel_cov(k, d, 0.0), abs=0.02)

    def test_se_spectral_scale(self):
        """Squared-exponential frequencies have sd 1/rho."""
        rng = np.random.default_rng(11)
        omega, _ = sample_basis(rng, Kernel("se", rho=0.5), size=200_000)
        assert np.std(omega) == pytest.approx(2.0, rel=0.02)

    def test_default_rho_matches_prior_mean_scale(self):
        """The default length scale equals sqrt(shape/rate) for the
        Gamma(1, pi^2/4) prior on rho^2."""
        assert Kernel().rho == pytest.approx(math.sqrt(1.0 / (math.pi**2 / 4.0)))
