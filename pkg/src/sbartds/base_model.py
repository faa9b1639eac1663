"""Gaussian linear base model h(y | x, theta) under the improper prior
pi(theta) proportional to 1/sigma."""

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import DegenerateStateError, SingularDesignError

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass
class BaseModel:
    alpha: float
    beta: np.ndarray
    sigma: float

    def mean(self, x):
        """alpha + x . beta for a point (P,) or matrix (n, P)."""
        return self.alpha + np.asarray(x, dtype=float) @ self.beta

    def density(self, y, x):
        m = self.mean(x)
        z = (np.asarray(y, dtype=float) - m) / self.sigma
        return np.exp(-0.5 * z * z) / (self.sigma * _SQRT_2PI)

    def log_density(self, y, x):
        m = self.mean(x)
        z = (np.asarray(y, dtype=float) - m) / self.sigma
        return -0.5 * z * z - math.log(self.sigma * _SQRT_2PI)

    def sample(self, rng, x, size=None):
        m = self.mean(x)
        if size is None:
            return m + self.sigma * rng.standard_normal(np.shape(m) or None)
        return m + self.sigma * rng.standard_normal(size)


def base_density(theta, x, y):
    return theta.density(y, x)


def base_sample(rng, theta, x, size=None):
    return theta.sample(rng, x, size=size)


def update_theta(rng, theta, augmented, X):
    """Gibbs draw of theta from its flat-prior full conditional.

    The likelihood runs over every row of the augmented data (observed and
    rejected proposals alike): sigma^2 comes from a scaled inverse chi-square
    on the residual sum of squares with n_total - P - 1 degrees of freedom,
    then (alpha, beta) from the conditional Gaussian around the OLS solution.
    """
    X = np.asarray(X, dtype=float)
    rows_x = X[augmented.obs]
    return _update_theta_rows(rng, rows_x, augmented.y_rows)


def _update_theta_rows(rng, rows_x, y_rows):
    n = len(y_rows)
    w = np.column_stack([np.ones(n), rows_x])
    p = w.shape[1]
    if n <= p:
        raise SingularDesignError(
            f"need more than {p} rows to update the base model, have {n}"
        )
    gram = w.T @ w
    try:
        chol = linalg.cho_factor(gram, lower=True)
    except linalg.LinAlgError as err:
        raise SingularDesignError("base-model design matrix is singular") from err
    coef_hat = linalg.cho_solve(chol, w.T @ y_rows)
    resid = y_rows - w @ coef_hat
    rss = float(resid @ resid)
    if not rss > 0.0:
        raise DegenerateStateError("zero residual sum of squares in base model")
    sigma2 = rss / rng.chisquare(n - p)
    # coef | sigma2 ~ Normal(coef_hat, sigma2 * gram^-1), drawn through the
    # Cholesky factor of gram.
    z = rng.standard_normal(p)
    coef = coef_hat + math.sqrt(sigma2) * linalg.solve_triangular(
        chol[0].T, z, lower=False
    )
    return BaseModel(alpha=float(coef[0]), beta=coef[1:], sigma=math.sqrt(sigma2))
