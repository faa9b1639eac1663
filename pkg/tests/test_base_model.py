"""Gaussian linear base model: evaluation, sampling, and the flat-prior
conjugate update that runs over all augmented rows."""

import math

import numpy as np
import pytest
from scipy import stats

from sbartds import (
    AugmentedData,
    BaseModel,
    DegenerateStateError,
    SingularDesignError,
    update_theta,
)
from sbartds.base_model import base_density, base_sample


def _theta():
    return BaseModel(alpha=0.5, beta=np.array([1.0, -2.0]), sigma=0.7)


class TestEvaluation:
    def test_mean_point_and_matrix(self):
        th = _theta()
        assert th.mean(np.array([1.0, 1.0])) == pytest.approx(-0.5)
        X = np.array([[1.0, 1.0], [0.0, 0.0]])
        np.testing.assert_allclose(th.mean(X), [-0.5, 0.5])

    def test_density_matches_normal_pdf(self):
        th = _theta()
        x = np.array([0.3, -0.4])
        m = 0.5 + 0.3 + 0.8
        y = np.linspace(-3, 5, 17)
        np.testing.assert_allclose(
            th.density(y, x), stats.norm.pdf(y, loc=m, scale=0.7), atol=1e-12
        )

    def test_log_density_consistent(self):
        th = _theta()
        x = np.array([0.1, 0.2])
        y = np.array([0.0, 1.0, 2.0])
        np.testing.assert_allclose(
            np.exp(th.log_density(y, x)), th.density(y, x), atol=1e-12
        )

    def test_module_level_wrappers(self):
        th = _theta()
        x = np.array([0.3, 0.3])
        assert base_density(th, x, 1.0) == pytest.approx(float(th.density(1.0, x)))
        rng = np.random.default_rng(0)
        draws = base_sample(rng, th, x, size=50_000)
        assert np.mean(draws) == pytest.approx(float(th.mean(x)), abs=0.01)
        assert np.std(draws) == pytest.approx(0.7, abs=0.01)


class TestUpdateTheta:
    """Flat-prior conjugate draw over the augmented rows."""

    @staticmethod
    def _augmented_fixture(rng, n=40):
        """Observations with one rejected proposal each; X rows repeat per
        proposal through the obs index, not by duplication of X."""
        X = rng.uniform(-1, 1, size=(n, 1))
        truth = BaseModel(alpha=1.0, beta=np.array([2.0]), sigma=0.5)
        lists = []
        for i in range(n):
            y0 = float(truth.sample(rng, X[i]))
            y1 = float(truth.sample(rng, X[i]))
            lists.append([y0, y1])
        return X, AugmentedData.from_lists(lists)

    def test_posterior_mean_is_ols(self):
        """E[coef] equals the least-squares solution on augmented rows."""
        rng = np.random.default_rng(99)
        X, aug = self._augmented_fixture(rng)
        rows_x = X[aug.obs]
        w = np.column_stack([np.ones(aug.n_total), rows_x])
        coef_hat, *_ = np.linalg.lstsq(w, aug.y_rows, rcond=None)
        draws_a = []
        draws_b = []
        for _ in range(4000):
            th = update_theta(rng, None, aug, X)
            draws_a.append(th.alpha)
            draws_b.append(th.beta[0])
        assert np.mean(draws_a) == pytest.approx(coef_hat[0], abs=0.01)
        assert np.mean(draws_b) == pytest.approx(coef_hat[1], abs=0.02)

    def test_sigma_posterior_moment(self):
        """sigma^2 = rss / chi2(n - p): mean of draws is rss/(n - p - 2)."""
        rng = np.random.default_rng(123)
        X, aug = self._augmented_fixture(rng)
        rows_x = X[aug.obs]
        w = np.column_stack([np.ones(aug.n_total), rows_x])
        coef_hat, *_ = np.linalg.lstsq(w, aug.y_rows, rcond=None)
        rss = float(np.sum((aug.y_rows - w @ coef_hat) ** 2))
        dof = aug.n_total - 2
        expect = rss / (dof - 2.0)
        sig2 = [update_theta(rng, None, aug, X).sigma ** 2 for _ in range(6000)]
        assert np.mean(sig2) == pytest.approx(expect, rel=0.05)

    def test_too_few_rows_raises(self):
        aug = AugmentedData.from_lists([[1.0], [2.0]])
        X = np.array([[0.0], [1.0]])
        with pytest.raises(SingularDesignError):
            update_theta(np.random.default_rng(0), None, aug, X)

    def test_singular_design_raises(self):
        """A constant predictor column collides with the intercept."""
        aug = AugmentedData.from_lists([[1.0], [2.0], [3.0], [4.0]])
        X = np.full((4, 1), 0.5)
        with pytest.raises(SingularDesignError):
            update_theta(np.random.default_rng(0), None, aug, X)

    def test_exact_fit_raises(self):
        """Zero residual sum of squares cannot anchor a sigma draw.

        An intercept-only design with constant response is the one case
        where the fit is exact in floating point, not merely near-exact.
        """
        X = np.zeros((4, 0))
        aug = AugmentedData.from_lists([[2.0], [2.0], [2.0], [2.0]])
        with pytest.raises(DegenerateStateError):
            update_theta(np.random.default_rng(0), None, aug, X)
