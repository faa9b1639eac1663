"""Joint-distribution validation of the sampler (Geweke-style).

Two ways to sample the joint law p(state) p(y | state) must agree:
marginal-conditional (draw the state from its prior, generate data once)
and successive-conditional (alternate one posterior sweep with a fresh
data regeneration). Any transition-kernel bug shows up as a drift in the
successive chain's moments. The base model is held at a fixed theta
because its improper flat prior has no generative side, and the leaf
scale prior is truncated so the prior predictive keeps the rejection
counts integrable.
"""

import math
from dataclasses import dataclass

import numpy as np

from .backfit import ForestState, Hyperparams, gibbs_sweep
from .base_model import BaseModel
from .basis import Kernel, sample_basis
from .links import Logit
from .trees import TreePrior, sample_tree_prior


def _half_cauchy_truncated(rng, scale, upper):
    """Inverse-cdf draw of |Cauchy(0, scale)| conditioned below upper."""
    top = math.atan(upper / scale)
    return scale * math.tan(top * rng.uniform())


def draw_prior_state(rng, p, link, theta, hyper, n_trees, kernel_family="se"):
    """One state from the (fully proper) prior used by the harness."""
    sigma_mu = _half_cauchy_truncated(rng, hyper.sigma_mu_scale, hyper.sigma_mu_max)
    gamma = hyper.gamma_mean + math.sqrt(hyper.gamma_var) * rng.standard_normal()
    u = rng.beta(hyper.a_shape1, hyper.a_shape2)
    u = min(max(u, 1e-12), 1.0 - 1e-12)
    a = p * u / (1.0 - u)
    s = rng.dirichlet(np.full(p, a / p))
    rho = math.sqrt(rng.gamma(hyper.rho_shape, 1.0 / hyper.rho_rate))
    kernel = Kernel(family=kernel_family, rho=rho)
    prior = TreePrior(
        alpha=hyper.alpha, beta=hyper.beta, max_depth=hyper.max_depth, split_probs=s
    )
    trees = []
    for _ in range(n_trees):
        tree = sample_tree_prior(rng, prior)
        tree.tau = rng.exponential(1.0 / hyper.tau_rate)
        omega, b = sample_basis(rng, kernel)
        tree.omega = omega
        tree.b = b
        tree.set_leaf_values(
            sigma_mu / math.sqrt(n_trees) * rng.standard_normal(tree.n_leaves())
        )
        trees.append(tree)
    return ForestState(
        trees=trees,
        gamma=gamma,
        sigma_mu=sigma_mu,
        s=s,
        a=a,
        kernel=kernel,
        theta=theta,
        link=link,
        hyper=hyper,
    )


def generate_data(rng, state, X, cap):
    """Vectorized rejection draw of y | state at each covariate row.
    Returns (y, total rejected count)."""
    from .backfit import augment_all, forest_g
    from .basis import SQRT2

    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = len(X)
    g = forest_g(state, X)
    omega, b = state.basis_arrays()
    mean = state.theta.alpha + X @ state.theta.beta
    sd = state.theta.sigma
    y = np.empty(n)
    total_rejected = 0
    active = np.arange(n)
    rounds = 0
    while len(active):
        rounds += 1
        if rounds > cap:
            from .errors import DivergingRejectionError

            raise DivergingRejectionError(
                f"more than {cap} rejected proposals while generating"
            )
        ys = mean[active] + sd * rng.standard_normal(len(active))
        basis = SQRT2 * np.cos(np.outer(ys, omega) + b)
        r = state.gamma + np.einsum("am,am->a", basis, g[active])
        acc = rng.uniform(size=len(active)) < state.link.cdf(r)
        y[active[acc]] = ys[acc]
        total_rejected += int((~acc).sum())
        active = active[~acc]
    return y, total_rejected


def state_stats(state):
    depths = [t.depth() for t in state.trees]
    return (
        state.gamma,
        state.sigma_mu,
        float(np.mean(depths)),
    )


STAT_NAMES = ("gamma", "sigma_mu", "mean_depth", "sum_rejected")


@dataclass
class GewekeResult:
    stat_names: tuple
    marginal_mean: np.ndarray
    marginal_se: np.ndarray
    successive_mean: np.ndarray
    successive_se: np.ndarray
    z_scores: np.ndarray

    def max_abs_z(self):
        return float(np.max(np.abs(self.z_scores)))


def _batch_se(series, n_batches=100):
    """Batch-means standard error of the mean of a correlated series."""
    series = np.asarray(series, dtype=float)
    size = len(series) // n_batches
    trimmed = series[: size * n_batches].reshape(n_batches, size)
    means = trimmed.mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(n_batches))


def run_geweke(
    seed=0,
    n_obs=10,
    p=2,
    n_trees=3,
    sweeps=20000,
    reps=20000,
    link=None,
    sigma_mu_max=4.0,
    cap=10**6,
):
    """Run both arms and return the per-statistic z scores.

    The compared statistics are gamma, sigma_mu, the mean over trees of
    tree depth, and the total rejected-proposal count of the generated
    data set.
    """
    link = link if link is not None else Logit()
    rng = np.random.default_rng([seed, 2024])
    hyper = Hyperparams(sigma_mu_max=sigma_mu_max, rejection_cap=cap)
    X = rng.uniform(size=(n_obs, p))
    theta = BaseModel(alpha=0.2, beta=np.linspace(0.5, -0.5, p), sigma=0.75)

    marg = np.empty((reps, 4))
    for rep in range(reps):
        state = draw_prior_state(rng, p, link, theta, hyper, n_trees)
        _, rejected = generate_data(rng, state, X, cap)
        marg[rep] = (*state_stats(state), rejected)

    succ = np.empty((sweeps, 4))
    state = draw_prior_state(rng, p, link, theta, hyper, n_trees)
    y, rejected = generate_data(rng, state, X, cap)
    for it in range(sweeps):
        gibbs_sweep(rng, state, X, y, cap=cap, update_base=False)
        y, rejected = generate_data(rng, state, X, cap)
        succ[it] = (*state_stats(state), rejected)

    marginal_mean = marg.mean(axis=0)
    marginal_se = marg.std(axis=0, ddof=1) / math.sqrt(reps)
    successive_mean = succ.mean(axis=0)
    successive_se = np.array([_batch_se(succ[:, j]) for j in range(4)])
    z = (marginal_mean - successive_mean) / np.sqrt(marginal_se**2 + successive_se**2)
    return GewekeResult(
        stat_names=STAT_NAMES,
        marginal_mean=marginal_mean,
        marginal_se=marginal_se,
        successive_mean=successive_mean,
        successive_se=successive_se,
        z_scores=z,
    )
