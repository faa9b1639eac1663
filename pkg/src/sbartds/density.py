"""Posterior functionals: conditional density grids, credible bands,
predictive means, and the integrated L1 (total variation style) metric.

Densities are evaluated on the standardized response scale used by the
sampler and normalized on the caller's grid; mapping back to the raw
scale (values / sd, grid * sd + mean) happens at the output interface.
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from .backfit import forest_g
from .base_model import base_density
from .basis import SQRT2
from .errors import ConfigError, DegenerateStateError


@dataclass
class DensityGrid:
    """Per-draw, per-query density values on a common y grid.

    draws has shape (n_draws, n_queries, n_grid).
    """

    y_grid: np.ndarray
    x_queries: np.ndarray
    draws: np.ndarray


def default_y_grid(y, base_sd, n_points=512, pad_sds=3.0):
    """Evaluation grid spanning the data range plus pad_sds base-model sds."""
    y = np.asarray(y, dtype=float)
    lo = float(y.min()) - pad_sds * base_sd
    hi = float(y.max()) + pad_sds * base_sd
    return np.linspace(lo, hi, n_points)


def _check_grid(y_grid):
    y_grid = np.asarray(y_grid, dtype=float)
    if y_grid.ndim != 1 or len(y_grid) < 64:
        raise ConfigError("y_grid must be one-dimensional with at least 64 points")
    if np.any(np.diff(y_grid) <= 0):
        raise ConfigError("y_grid must be strictly increasing")
    return y_grid


def _extend_grid(y_grid, base_sd):
    """Pad the grid 3 base-sds past both ends at the edge spacing, so the
    normalizing integral sees the tails the grid may clip."""
    h_lo = y_grid[1] - y_grid[0]
    h_hi = y_grid[-1] - y_grid[-2]
    n_lo = max(int(np.ceil(3.0 * base_sd / h_lo)), 1)
    n_hi = max(int(np.ceil(3.0 * base_sd / h_hi)), 1)
    left = y_grid[0] - h_lo * np.arange(n_lo, 0, -1)
    right = y_grid[-1] + h_hi * np.arange(1, n_hi + 1)
    return np.concatenate([left, y_grid, right]), n_lo


def conditional_density(state, x, y_grid, return_normalizer=False):
    """Tilted conditional density on y_grid at one covariate row.

    The numerator is h(y|x, theta) * Phi{r(y, x)} pointwise. The
    normalizing integral is computed by composite Simpson quadrature on
    the grid extended 3 base-sds beyond both ends; a value below 1e-300
    means the acceptance function has collapsed on the base support and
    raises DegenerateStateError. The returned values are normalized so
    their Simpson integral over y_grid itself is 1 by construction.
    """
    y_grid = _check_grid(y_grid)
    x = np.asarray(x, dtype=float)
    ext, n_lo = _extend_grid(y_grid, state.theta.sigma)
    g = forest_g(state, x[None, :])[0]
    omega, b = state.basis_arrays()
    numer_ext = base_density(state.theta, x, ext) * state.link.cdf(
        state.gamma + (SQRT2 * np.cos(np.outer(ext, omega) + b)) @ g
    )
    denom = float(simpson(numer_ext, x=ext))
    if not denom > 1e-300:
        raise DegenerateStateError(
            "normalizing integral underflowed; acceptance function is "
            "degenerate on the base-model support"
        )
    numer = numer_ext[n_lo : n_lo + len(y_grid)]
    on_grid = float(simpson(numer, x=y_grid))
    if not on_grid > 1e-300:
        raise DegenerateStateError("density mass on the evaluation grid underflowed")
    values = numer / on_grid
    if return_normalizer:
        return values, denom
    return values


def evaluate_density_grid(states, x_queries, y_grid):
    """DensityGrid over retained draws and query rows."""
    x_queries = np.atleast_2d(np.asarray(x_queries, dtype=float))
    y_grid = np.asarray(y_grid, dtype=float)
    draws = np.empty((len(states), len(x_queries), len(y_grid)))
    for d, state in enumerate(states):
        for q, x in enumerate(x_queries):
            draws[d, q] = conditional_density(state, x, y_grid)
    return DensityGrid(y_grid=y_grid, x_queries=x_queries, draws=draws)


def posterior_summary(grid):
    """Pointwise mean and 2.5% / 97.5% bands across draws.

    Returns (mean, lower, upper), each (n_queries, n_grid).
    """
    mean = grid.draws.mean(axis=0)
    lower = np.quantile(grid.draws, 0.025, axis=0)
    upper = np.quantile(grid.draws, 0.975, axis=0)
    return mean, lower, upper


def predictive_mean(state, x, y_grid):
    """E[y | x] under the tilted density, by the same quadrature."""
    y_grid = np.asarray(y_grid, dtype=float)
    values = conditional_density(state, x, y_grid)
    return float(simpson(y_grid * values, x=y_grid))


def tv_distance(f0, y_grid, fhat_curves, x_sample):
    """Integrated L1 distance between a true conditional density and
    estimated curves, averaged over covariate draws:
    mean_i of integral |f0(y, x_i) - fhat_i(y)| dy on y_grid.

    f0(y_grid, x) must return density values on the grid; fhat_curves is
    (len(x_sample), n_grid), or a single curve shared by every x.
    """
    y_grid = np.asarray(y_grid, dtype=float)
    x_sample = np.atleast_2d(np.asarray(x_sample, dtype=float))
    fhat_curves = np.asarray(fhat_curves, dtype=float)
    if fhat_curves.ndim == 1:
        fhat_curves = np.broadcast_to(fhat_curves, (len(x_sample), len(y_grid)))
    total = 0.0
    for x, curve in zip(x_sample, fhat_curves):
        gap = np.abs(np.asarray(f0(y_grid, x), dtype=float) - curve)
        total += float(simpson(gap, x=y_grid))
    return total / len(x_sample)


def tilted_density(theta, link, exponent, y_grid, x):
    """Normalized h(y|x, theta) * Phi{exponent(y, x)} on y_grid, for an
    arbitrary exponent function. Used to study acceptance functions that
    are not built from a forest (the density machinery above is the
    exponent = r special case)."""
    y_grid = np.asarray(y_grid, dtype=float)
    numer = base_density(theta, x, y_grid) * link.cdf(exponent(y_grid, x))
    denom = float(simpson(numer, x=y_grid))
    if not denom > 1e-300:
        raise DegenerateStateError("tilted density underflowed on the grid")
    return numer / denom
