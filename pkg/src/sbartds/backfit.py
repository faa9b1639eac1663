"""Forest state and the within-sweep conditional updates.

The latent regression is Z_row = gamma + sum_m B_m(Y_row) g_m(X_row) + eps,
eps ~ N(0, 1/lambda_row). Each tree contributes through a single cosine
feature of y scaled by a soft tree fit in x, so per tree the leaf values
enter linearly and can be marginalized under their N(0, sigma_mu^2 / M)
prior. All tree-side moves are Metropolis steps on that collapsed
marginal likelihood, evaluated in leaf-count dimension via the Woodbury
identity rather than the row-count dimension.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import special
from scipy.linalg import LinAlgError, cho_factor, cho_solve, solve_triangular

from .augment import AugmentedData, sample_lambda, sample_latent_z
from .base_model import BaseModel, update_theta
from .basis import SQRT2, Kernel, basis_eval, sample_basis
from .errors import DegenerateStateError, DivergingRejectionError
from .trees import (
    Node,
    SoftTree,
    TreePrior,
    leaf_weights,
    propose_tree,
    tree_log_prior,
)

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class Hyperparams:
    """Fixed prior constants and tuning knobs for the sampler."""

    alpha: float = 0.95
    beta: float = 2.0
    max_depth: int = 10
    sigma_mu_scale: float = 1.5
    sigma_mu_max: float | None = None
    gamma_mean: float = 1.0
    gamma_var: float = 1.0
    tau_rate: float = 10.0
    rho_shape: float = 1.0
    rho_rate: float = math.pi**2 / 4.0
    a_shape1: float = 0.5
    a_shape2: float = 1.0
    rejection_cap: int = 10**4
    tau_step: float = 0.3
    rho_step: float = 0.3


@dataclass
class ForestState:
    """Mutable sampler state: forest, offsets, and hyperparameters."""

    trees: list
    gamma: float
    sigma_mu: float
    s: np.ndarray
    a: float
    kernel: Kernel
    theta: BaseModel
    link: object
    hyper: Hyperparams = field(default_factory=Hyperparams)

    @property
    def M(self):
        return len(self.trees)

    @property
    def rho(self):
        return self.kernel.rho

    @property
    def lambda_mu(self):
        """Leaf-value prior precision M / sigma_mu^2."""
        return self.M / self.sigma_mu**2

    def tree_prior(self):
        return TreePrior(
            alpha=self.hyper.alpha,
            beta=self.hyper.beta,
            max_depth=self.hyper.max_depth,
            split_probs=self.s,
        )

    def basis_arrays(self):
        omega = np.array([t.omega for t in self.trees])
        b = np.array([t.b for t in self.trees])
        return omega, b

    def eval_r(self, y, x):
        """Tilting exponent r(y, x) for scalar/array y at one covariate row."""
        y = np.asarray(y, dtype=float)
        g = forest_g(self, np.atleast_2d(np.asarray(x, dtype=float)))[0]
        omega, b = self.basis_arrays()
        basis = SQRT2 * np.cos(np.multiply.outer(y, omega) + b)
        return self.gamma + basis @ g


def init_state(rng, X, y, link, kernel=None, n_trees=50, hyper=None):
    """Starting state: single-leaf trees (zero fit, so r = gamma and the
    density starts at the fitted base model), prior draws for per-tree
    scales and bases, and a flat-prior least-squares estimate for theta.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    hyper = hyper if hyper is not None else Hyperparams()
    kernel = kernel if kernel is not None else Kernel()
    rho_init = math.sqrt(hyper.rho_shape / hyper.rho_rate)
    kernel = replace(kernel, rho=rho_init)
    trees = []
    for _ in range(n_trees):
        omega, b = sample_basis(rng, kernel)
        tau = rng.exponential(1.0 / hyper.tau_rate)
        trees.append(SoftTree(Node(value=0.0), tau=tau, omega=omega, b=b))
    w = np.column_stack([np.ones(n), X])
    coef, *_ = np.linalg.lstsq(w, y, rcond=None)
    resid = y - w @ coef
    dof = max(n - p - 1, 1)
    sigma = math.sqrt(float(resid @ resid) / dof)
    theta = BaseModel(alpha=float(coef[0]), beta=coef[1:].copy(), sigma=max(sigma, 1e-8))
    return ForestState(
        trees=trees,
        gamma=hyper.gamma_mean,
        sigma_mu=1.0,
        s=np.full(p, 1.0 / p),
        a=float(p),
        kernel=kernel,
        theta=theta,
        link=link,
        hyper=hyper,
    )


def forest_g(state, X):
    """Soft tree fits g[i, m] = sum_l w_ml(X[i]) mu_ml."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    g = np.empty((len(X), state.M))
    for m, tree in enumerate(state.trees):
        g[:, m] = leaf_weights(tree, X) @ tree.leaf_values()
    return g


def augment_all(rng, state, X, y, cap=None, g=None):
    """Impute rejected proposals for every observation in one active-set
    sweep: each round draws a base-model proposal for all observations not
    yet accepted, so the round count is the running per-observation
    proposal count. Rounds beyond the cap raise DivergingRejectionError.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    n = len(y)
    cap = cap if cap is not None else state.hyper.rejection_cap
    if g is None:
        g = forest_g(state, X)
    omega, b = state.basis_arrays()
    mean = state.theta.alpha + X @ state.theta.beta
    sd = state.theta.sigma
    rejected = [[] for _ in range(n)]
    active = np.arange(n)
    rounds = 0
    while len(active):
        rounds += 1
        if rounds > cap:
            raise DivergingRejectionError(
                f"more than {cap} rejected proposals for one observation"
            )
        ys = mean[active] + sd * rng.standard_normal(len(active))
        basis = SQRT2 * np.cos(np.outer(ys, omega) + b)
        r = state.gamma + np.einsum("am,am->a", basis, g[active])
        acc = rng.uniform(size=len(active)) < state.link.cdf(r)
        for i, val in zip(active[~acc], ys[~acc]):
            rejected[i].append(float(val))
        active = active[~acc]
    return AugmentedData.from_lists(
        [[float(y[i])] + rejected[i] for i in range(n)]
    )


@dataclass
class BackfitWorkspace:
    """One tree's regression view: residual R (z minus every other term),
    precision diagonal, and the n_total x L design with rows
    B_k(Y_row) * soft leaf weights at X_row."""

    resid: np.ndarray
    lam: np.ndarray
    design: np.ndarray


def backfit_residuals(state, aug, k, X):
    """Assemble tree k's BackfitWorkspace from scratch."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    omega, b = state.basis_arrays()
    basis = SQRT2 * np.cos(np.outer(aug.y_rows, omega) + b)
    g = forest_g(state, X)
    contrib = basis * g[aug.obs]
    resid = aug.z - state.gamma - (contrib.sum(axis=1) - contrib[:, k])
    design = basis[:, k, None] * leaf_weights(state.trees[k], X)[aug.obs]
    return BackfitWorkspace(resid=resid, lam=aug.lam, design=design)


class SweepWorkspace:
    """Cached per-row quantities for one augmented data set.

    basis[row, m] = B_m(Y_row); leaf_w[m][i, l] = soft path weight of leaf
    l of tree m at observation i; contrib[row, m] = tree m's additive term.
    """

    def __init__(self, state, X, aug):
        self.state = state
        self.X = np.atleast_2d(np.asarray(X, dtype=float))
        self.aug = aug
        omega, b = state.basis_arrays()
        self.basis = SQRT2 * np.cos(np.outer(aug.y_rows, omega) + b)
        self.leaf_w = [leaf_weights(t, self.X) for t in state.trees]
        self.contrib = np.empty((aug.n_total, state.M))
        for m in range(state.M):
            self.refresh_contrib(m)

    def refresh_contrib(self, m):
        tree = self.state.trees[m]
        g = self.leaf_w[m] @ tree.leaf_values()
        self.contrib[:, m] = self.basis[:, m] * g[self.aug.obs]

    def refresh_tree(self, m):
        """Recompute leaf weights and contribution after a structure or
        bandwidth change."""
        self.leaf_w[m] = leaf_weights(self.state.trees[m], self.X)
        self.refresh_contrib(m)

    def refresh_basis(self, m):
        """Recompute the cosine column after an (omega, b) change."""
        tree = self.state.trees[m]
        self.basis[:, m] = basis_eval(tree.omega, tree.b, self.aug.y_rows)
        self.refresh_contrib(m)

    def fit(self):
        return self.state.gamma + self.contrib.sum(axis=1)

    def residual(self, m):
        """Backfitting residual: latent z minus all terms but tree m's."""
        return self.aug.z - (self.fit() - self.contrib[:, m])

    def tree_workspace(self, m, leaf_w=None, basis_col=None, resid=None):
        """BackfitWorkspace for tree m, optionally with a trial leaf-weight
        matrix or basis column substituted."""
        w = self.leaf_w[m] if leaf_w is None else leaf_w
        col = self.basis[:, m] if basis_col is None else basis_col
        return BackfitWorkspace(
            resid=self.residual(m) if resid is None else resid,
            lam=self.aug.lam,
            design=col[:, None] * w[self.aug.obs],
        )


def _chol_info(design, lam, lambda_mu):
    """Cholesky of A = design' Lam design + lambda_mu I with one jittered
    retry; A is positive definite up to roundoff."""
    lam_design = design * lam[:, None]
    n_leaf = design.shape[1]
    a_mat = design.T @ lam_design + lambda_mu * np.eye(n_leaf)
    try:
        chol = cho_factor(a_mat, lower=True)
    except LinAlgError:
        jitter = 1e-10 * max(float(np.trace(a_mat)) / n_leaf, 1.0)
        try:
            chol = cho_factor(a_mat + jitter * np.eye(n_leaf), lower=True)
        except LinAlgError as exc:
            raise DegenerateStateError(
                "leaf information matrix is not positive definite"
            ) from exc
    return chol, lam_design


def marginal_loglik(ws, lambda_mu):
    """Log marginal likelihood of resid = design @ mu + eps with
    mu ~ N(0, I/lambda_mu) integrated out and eps_row ~ N(0, 1/lam_row).

    Equals the log-density of N(0, Lam^{-1} + design design' / lambda_mu)
    at resid, but is evaluated through the leaf-dimensional matrix
    A = design' Lam design + lambda_mu I (Woodbury identity and matrix
    determinant lemma); the row-dimensional covariance never materializes.
    """
    resid = np.asarray(ws.resid, dtype=float)
    lam = np.asarray(ws.lam, dtype=float)
    design = np.asarray(ws.design, dtype=float)
    n, n_leaf = design.shape
    chol, lam_design = _chol_info(design, lam, lambda_mu)
    delta = lam_design.T @ resid
    logdet = 2.0 * float(np.log(np.diag(chol[0])).sum())
    quad = float(resid @ (lam * resid) - delta @ cho_solve(chol, delta))
    return (
        -0.5 * n * _LOG_2PI
        + 0.5 * float(np.log(lam).sum())
        - 0.5 * (logdet - n_leaf * math.log(lambda_mu))
        - 0.5 * quad
    )


def sample_leaf_values(rng, ws, lambda_mu):
    """Draw mu | resid ~ N(V delta, V), V = A^{-1}, delta = design' Lam resid."""
    chol, lam_design = _chol_info(ws.design, np.asarray(ws.lam, dtype=float), lambda_mu)
    delta = lam_design.T @ np.asarray(ws.resid, dtype=float)
    mean = cho_solve(chol, delta)
    noise = solve_triangular(
        chol[0].T, rng.standard_normal(len(delta)), lower=False
    )
    return mean + noise


def update_latents(rng, state, ws):
    """Collapsed draw of (Z, lambda): Z from the link's location family
    truncated by the accept/reject sign, then lambda | Z."""
    mu = ws.fit()
    ws.aug.z = np.atleast_1d(sample_latent_z(rng, state.link, mu, ws.aug.accepted))
    ws.aug.lam = np.atleast_1d(sample_lambda(rng, state.link, ws.aug.z, mu))


def update_tree_and_basis(rng, state, ws, m):
    """One backfitting pass for tree m: Metropolis on the tree structure,
    Metropolis on the basis frequency/phase (fresh prior proposal, so the
    acceptance is the bare likelihood ratio), then a leaf-value redraw.
    Both Metropolis steps use the leaf-marginalized likelihood.
    """
    resid = ws.residual(m)
    lam_mu = state.lambda_mu
    prior = state.tree_prior()
    tree = state.trees[m]

    ll_cur = marginal_loglik(ws.tree_workspace(m, resid=resid), lam_mu)

    proposal, log_hastings, _move = propose_tree(rng, tree, prior)
    log_prior_new = tree_log_prior(proposal, prior)
    if np.isfinite(log_prior_new):
        new_w = leaf_weights(proposal, ws.X)
        ll_new = marginal_loglik(
            ws.tree_workspace(m, leaf_w=new_w, resid=resid), lam_mu
        )
        log_acc = (
            (log_prior_new - tree_log_prior(tree, prior))
            + (ll_new - ll_cur)
            + log_hastings
        )
        if math.log(rng.uniform()) < log_acc:
            state.trees[m] = proposal
            ws.leaf_w[m] = new_w
            tree = proposal
            ll_cur = ll_new

    omega_new, b_new = sample_basis(rng, state.kernel)
    col_new = basis_eval(omega_new, b_new, ws.aug.y_rows)
    ll_new = marginal_loglik(
        ws.tree_workspace(m, basis_col=col_new, resid=resid), lam_mu
    )
    if math.log(rng.uniform()) < ll_new - ll_cur:
        tree.omega = float(omega_new)
        tree.b = float(b_new)
        ws.basis[:, m] = col_new

    values = sample_leaf_values(rng, ws.tree_workspace(m, resid=resid), lam_mu)
    tree.set_leaf_values(values)
    ws.refresh_contrib(m)


def update_gamma(rng, state, ws):
    """Conjugate normal draw for the global offset gamma."""
    e = ws.aug.z - ws.contrib.sum(axis=1)
    lam = ws.aug.lam
    prec = 1.0 / state.hyper.gamma_var + float(lam.sum())
    mean = (state.hyper.gamma_mean / state.hyper.gamma_var + float(lam @ e)) / prec
    state.gamma = mean + math.sqrt(1.0 / prec) * rng.standard_normal()


def _slice_sample(rng, x0, logf, width=0.5, max_steps=50, lower=0.0, upper=None):
    """Univariate slice sampler with stepping out then shrinkage."""
    ly = logf(x0) + math.log(rng.uniform())
    left = x0 - width * rng.uniform()
    right = left + width
    j = int(math.floor(max_steps * rng.uniform()))
    k = max_steps - 1 - j
    while j > 0 and left > lower and logf(left) > ly:
        left -= width
        j -= 1
    while k > 0 and (upper is None or right < upper) and logf(right) > ly:
        right += width
        k -= 1
    left = max(left, lower)
    if upper is not None:
        right = min(right, upper)
    while True:
        x1 = rng.uniform(left, right)
        if logf(x1) >= ly:
            return x1
        if x1 < x0:
            left = x1
        else:
            right = x1


def update_sigma_mu(rng, state):
    """Slice draw of the leaf scale sigma_mu: half-Cauchy prior times the
    N(0, sigma_mu^2 / M) likelihood of the current leaf values."""
    if state.trees:
        values = np.concatenate([t.leaf_values() for t in state.trees])
    else:
        values = np.zeros(0)
    n_leaf = len(values)
    ss = float(values @ values)
    m_trees = max(state.M, 1)
    scale = state.hyper.sigma_mu_scale

    def logf(sig):
        # sig*sig can underflow to 0.0 for denormal candidates; treat that
        # region as having no posterior mass.
        if sig <= 0.0 or sig * sig <= 0.0:
            return -math.inf
        return (
            -math.log1p((sig / scale) ** 2)
            - n_leaf * math.log(sig)
            - 0.5 * m_trees * ss / sig**2
        )

    state.sigma_mu = _slice_sample(
        rng, state.sigma_mu, logf, upper=state.hyper.sigma_mu_max
    )


def update_tau(rng, state, ws, m):
    """Log-scale random-walk Metropolis on tree m's bandwidth tau, using
    the leaf-marginalized likelihood; an accepted move redraws the leaf
    values so the (tau, mu) pair moves as a block.
    """
    tree = state.trees[m]
    resid = ws.residual(m)
    lam_mu = state.lambda_mu
    tau_new = tree.tau * math.exp(state.hyper.tau_step * rng.standard_normal())
    ll_cur = marginal_loglik(ws.tree_workspace(m, resid=resid), lam_mu)
    trial = tree.clone()
    trial.tau = tau_new
    new_w = leaf_weights(trial, ws.X)
    ll_new = marginal_loglik(
        ws.tree_workspace(m, leaf_w=new_w, resid=resid), lam_mu
    )
    log_acc = (
        (ll_new - ll_cur)
        - state.hyper.tau_rate * (tau_new - tree.tau)
        + math.log(tau_new / tree.tau)
    )
    if math.log(rng.uniform()) < log_acc:
        tree.tau = tau_new
        ws.leaf_w[m] = new_w
        values = sample_leaf_values(rng, ws.tree_workspace(m, resid=resid), lam_mu)
        tree.set_leaf_values(values)
        ws.refresh_contrib(m)


def _omega_loglik(state, rho):
    """Log density of the per-tree frequencies under the kernel's spectral
    law at length-scale rho, dropping rho-free constants."""
    omega, _ = state.basis_arrays()
    m = len(omega)
    fam = state.kernel.family
    if fam == "se":
        return m * math.log(rho) - 0.5 * rho**2 * float(omega @ omega)
    if fam == "matern":
        nu = state.kernel.nu
        x = rho * omega
        return m * math.log(rho) - 0.5 * (nu + 1.0) * float(
            np.log1p(x * x / nu).sum()
        )
    return m * math.log(rho) - rho * float(np.abs(omega).sum())


def update_rho(rng, state):
    """Length-scale update. The squared-exponential spectral law is
    Gaussian in omega, so rho^2 is conjugate gamma; the other kernels get
    a log-scale random-walk Metropolis step against the same prior.
    """
    omega, _ = state.basis_arrays()
    hyper = state.hyper
    if state.kernel.family == "se":
        shape = hyper.rho_shape + 0.5 * state.M
        rate = hyper.rho_rate + 0.5 * float(omega @ omega)
        rho_sq = rng.gamma(shape, 1.0 / rate)
        state.kernel = replace(state.kernel, rho=math.sqrt(rho_sq))
        return
    rho = state.kernel.rho
    rho_new = rho * math.exp(hyper.rho_step * rng.standard_normal())

    def log_post(r):
        # Gamma(shape, rate) prior on rho^2 mapped to a density in rho.
        return (
            (2.0 * hyper.rho_shape - 1.0) * math.log(r)
            - hyper.rho_rate * r**2
            + _omega_loglik(state, r)
        )

    log_acc = log_post(rho_new) - log_post(rho) + math.log(rho_new / rho)
    if math.log(rng.uniform()) < log_acc:
        state.kernel = replace(state.kernel, rho=rho_new)


def update_scale_hypers(rng, state, ws):
    """Refresh the scale hyperparameters: sigma_mu, every tau_m, then rho."""
    update_sigma_mu(rng, state)
    for m in range(state.M):
        update_tau(rng, state, ws, m)
    update_rho(rng, state)
    return state.sigma_mu, [t.tau for t in state.trees], state.kernel.rho


def split_counts(state):
    """Branch counts per covariate across the forest."""
    counts = np.zeros(len(state.s))
    for tree in state.trees:
        for node in tree.branches():
            counts[node.feature] += 1
    return counts


def update_split_probs(rng, state):
    """Concentration then simplex. a moves by independence Metropolis,
    proposing a/(a+P) from its Beta prior so the acceptance ratio is the
    Dirichlet-multinomial marginal of the split counts with s integrated
    out; s is then drawn from its conjugate Dirichlet given the new a.
    """
    counts = split_counts(state)
    p = len(counts)
    n = float(counts.sum())

    def log_marg(a):
        return float(
            special.gammaln(a)
            - special.gammaln(a + n)
            + special.gammaln(a / p + counts).sum()
            - p * special.gammaln(a / p)
        )

    u_new = float(
        np.clip(rng.beta(state.hyper.a_shape1, state.hyper.a_shape2), 1e-12, 1 - 1e-12)
    )
    a_new = p * u_new / (1.0 - u_new)
    if math.log(rng.uniform()) < log_marg(a_new) - log_marg(state.a):
        state.a = a_new
    state.s = rng.dirichlet(state.a / p + counts)
    return state.s, state.a


def gibbs_sweep(rng, state, X, y, cap=None, update_base=True):
    """One full sweep of the two-layer sampler. Returns the workspace so
    callers can read augmentation statistics for the retained draw.

    Order: impute rejected proposals, update the base model on all rows,
    draw the latent (Z, lambda) pairs, backfit every tree, then the
    hyperparameters gamma, sigma_mu, tau, (s, a), rho. update_base=False
    holds theta fixed (validation harnesses need a fully proper prior).
    """
    aug = augment_all(rng, state, X, y, cap=cap)
    if update_base:
        state.theta = update_theta(rng, state.theta, aug, X)
    ws = SweepWorkspace(state, X, aug)
    update_latents(rng, state, ws)
    for m in range(state.M):
        update_tree_and_basis(rng, state, ws, m)
    update_gamma(rng, state, ws)
    update_sigma_mu(rng, state)
    for m in range(state.M):
        update_tau(rng, state, ws, m)
    update_split_probs(rng, state)
    update_rho(rng, state)
    return ws
