"""Two-layer data augmentation.

Layer one treats each observation as the first accepted proposal of a
rejection sampler for f(y|x) and imputes the rejected base-model draws.
Layer two attaches a latent utility Z to every proposal, truncated to
(0, inf) for the accepted point and (-inf, 0) for rejections, plus a
per-row Gaussian precision lambda whose mixing law realizes the logit or
Student-t link. Probit fixes lambda = 1.
"""

import math

import numpy as np
from scipy import special

from .errors import DivergingRejectionError
from .links import Logit, Probit, StudentT

DEFAULT_REJECTION_CAP = 10**4

_LOG_PI = math.log(math.pi)
_PI_SQ = math.pi**2


class AugmentedData:
    """Row-flattened augmentation state.

    Rows are grouped by observation: the observed point first (accepted),
    then that observation's rejected proposals. `obs` maps each row to its
    observation index.
    """

    def __init__(self, y_rows, obs, accepted):
        self.y_rows = np.asarray(y_rows, dtype=float)
        self.obs = np.asarray(obs, dtype=np.intp)
        self.accepted = np.asarray(accepted, dtype=bool)
        self.z = None
        self.lam = None

    @property
    def n_total(self):
        return len(self.y_rows)

    def n_obs(self):
        return int(self.obs.max()) + 1 if len(self.obs) else 0

    def counts(self):
        """Rejected count J_i per observation."""
        return np.bincount(self.obs, minlength=self.n_obs()) - 1

    def proposals(self, i):
        """Proposal values [Y_i0, Y_i1, ..., Y_iJ] for observation i."""
        return self.y_rows[self.obs == i]

    @classmethod
    def from_lists(cls, proposal_lists):
        y_rows, obs, accepted = [], [], []
        for i, ys in enumerate(proposal_lists):
            for j, y in enumerate(ys):
                y_rows.append(y)
                obs.append(i)
                accepted.append(j == 0)
        return cls(y_rows, obs, accepted)


def rejection_augment(rng, state, x_i, y_i, cap=DEFAULT_REJECTION_CAP, accept_prob=None):
    """Impute one observation's rejected proposals.

    Draws proposals from the base model and accepts each with probability
    Phi{r(y, x_i)} until the first acceptance; the observed y_i stands in
    for the accepted draw. Returns [y_i, rejected...]. Proposals beyond
    `cap` raise: a diverging rejection count means Phi{r} has collapsed
    near zero over the base model's support.
    """
    if accept_prob is None:
        link = state.link

        def accept_prob(ys):
            return link.cdf(state.eval_r(ys, x_i))

    mean = float(state.theta.mean(x_i))
    sd = state.theta.sigma
    out = [float(y_i)]
    used = 0
    batch = 8
    while True:
        ys = mean + sd * rng.standard_normal(batch)
        acc = rng.uniform(size=batch) < accept_prob(ys)
        if acc.any():
            first = int(np.argmax(acc))
            out.extend(ys[:first].tolist())
            return out
        out.extend(ys.tolist())
        used += batch
        if used > cap:
            raise DivergingRejectionError(
                f"more than {cap} rejected proposals for one observation"
            )
        batch = min(2 * batch, 4096)


def rejection_generate(rng, state, x_i, cap=DEFAULT_REJECTION_CAP, accept_prob=None):
    """Draw one observation from the tilted density by rejection, returning
    (accepted value, rejected proposals). Inverse of rejection_augment:
    here the accepted draw is kept rather than supplied.
    """
    if accept_prob is None:
        link = state.link

        def accept_prob(ys):
            return link.cdf(state.eval_r(ys, x_i))

    mean = float(state.theta.mean(x_i))
    sd = state.theta.sigma
    rejects = []
    used = 0
    batch = 8
    while True:
        ys = mean + sd * rng.standard_normal(batch)
        acc = rng.uniform(size=batch) < accept_prob(ys)
        if acc.any():
            first = int(np.argmax(acc))
            rejects.extend(ys[:first].tolist())
            return float(ys[first]), rejects
        rejects.extend(ys.tolist())
        used += batch
        if used > cap:
            raise DivergingRejectionError(
                f"more than {cap} rejected proposals for one observation"
            )
        batch = min(2 * batch, 4096)


# --- truncated draws from the link's standard location family ---


def _trunc_lower_normal(rng, a):
    """eps ~ Normal(0,1) conditioned on eps > a, vectorized over a."""
    a = np.asarray(a, dtype=float)
    out = np.empty_like(a)
    easy = a <= 5.0
    if easy.any():
        sf = special.ndtr(-a[easy])
        v = sf * (1.0 - rng.uniform(size=easy.sum()))
        out[easy] = -special.ndtri(v)
    hard = ~easy
    if hard.any():
        # Robert's exponential-proposal rejection for the deep tail.
        ah = a[hard]
        lam = 0.5 * (ah + np.sqrt(ah * ah + 4.0))
        vals = np.empty(len(ah))
        pending = np.ones(len(ah), dtype=bool)
        while pending.any():
            idx = np.flatnonzero(pending)
            cand = ah[idx] + rng.exponential(1.0, size=len(idx)) / lam[idx]
            ok = rng.uniform(size=len(idx)) < np.exp(-0.5 * (cand - lam[idx]) ** 2)
            vals[idx[ok]] = cand[ok]
            pending[idx[ok]] = False
        out[hard] = vals
    return out


def _trunc_lower_logistic(rng, a):
    """eps ~ Logistic(0,1) conditioned on eps > a."""
    a = np.asarray(a, dtype=float)
    sf = special.expit(-a)
    v = sf * (1.0 - rng.uniform(size=a.shape))
    return np.log1p(-v) - np.log(v)


def _trunc_lower_t(rng, a, nu):
    """eps ~ t_nu conditioned on eps > a."""
    a = np.asarray(a, dtype=float)
    sf = special.stdtr(nu, -a)
    v = sf * (1.0 - rng.uniform(size=a.shape))
    return -special.stdtrit(nu, v)


def _trunc_lower(rng, link, a):
    if isinstance(link, Probit):
        return _trunc_lower_normal(rng, a)
    if isinstance(link, Logit):
        return _trunc_lower_logistic(rng, a)
    return _trunc_lower_t(rng, a, link.nu)


def sample_latent_z(rng, link, mu, accepted):
    """Latent utilities Z = mu + eps with eps from the link's standard
    family, truncated so sign(Z) encodes accept (+) / reject (-).

    mu and accepted are broadcast-compatible arrays (or scalars).
    """
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    accepted = np.broadcast_to(np.asarray(accepted, dtype=bool), mu.shape)
    z = np.empty_like(mu)
    pos = accepted
    if pos.any():
        z[pos] = mu[pos] + _trunc_lower(rng, link, -mu[pos])
    neg = ~accepted
    if neg.any():
        # By symmetry of the family, eps < -mu has the law of -eps' with
        # eps' > mu.
        z[neg] = mu[neg] - _trunc_lower(rng, link, mu[neg])
    return z if z.shape != (1,) else float(z[0])


# --- precision mixing draws ---


def _ks_right_interval(lam, u):
    """Squeeze decision for lambda > 4/3: alternating series around 1.

    Returns (accept, reject) boolean arrays; elements undecided at a given
    truncation are refined until the partial-sum bounds bracket u.
    """
    n = len(lam)
    z = np.ones(n)
    x = np.exp(-0.5 * lam)
    accept = np.zeros(n, dtype=bool)
    reject = np.zeros(n, dtype=bool)
    active = np.ones(n, dtype=bool)
    j = 0
    while active.any():
        j += 1
        k = (j + 1) ** 2
        z[active] -= k * x[active] ** (k - 1)
        newly = active & (z > u)
        accept |= newly
        active &= ~newly
        if not active.any():
            break
        j += 1
        k = (j + 1) ** 2
        z[active] += k * x[active] ** (k - 1)
        newly = active & (z < u)
        reject |= newly
        active &= ~newly
    return accept, reject


def _ks_left_interval(lam, u):
    """Squeeze decision for lambda <= 4/3, in log space."""
    n = len(lam)
    h = (
        0.5 * math.log(2.0)
        + 2.5 * _LOG_PI
        - 2.5 * np.log(lam)
        - _PI_SQ / (2.0 * lam)
        + 0.5 * lam
    )
    log_u = np.log(u)
    z = np.ones(n)
    x = np.exp(-_PI_SQ / (2.0 * lam))
    coef = lam / _PI_SQ
    accept = np.zeros(n, dtype=bool)
    reject = np.zeros(n, dtype=bool)
    active = np.ones(n, dtype=bool)
    j = 0
    while active.any():
        j += 1
        z[active] -= coef[active] * x[active] ** (j * j - 1)
        with np.errstate(invalid="ignore", divide="ignore"):
            newly = active & (z > 0) & (h + np.log(np.maximum(z, 1e-300)) > log_u)
        accept |= newly
        active &= ~newly
        if not active.any():
            break
        j += 1
        k = (j + 1) ** 2
        z[active] += k * x[active] ** (k - 1)
        with np.errstate(invalid="ignore", divide="ignore"):
            newly = active & ((z <= 0) | (h + np.log(np.maximum(z, 1e-300)) < log_u))
        reject |= newly
        active &= ~newly
    return accept, reject


def _sample_lambda_logistic(rng, resid):
    """Precision lambda | resid for the logit link.

    The latent variance v = 1/lambda is the Holmes-Held mixing variable
    (sqrt(v)/2 follows the Kolmogorov-Smirnov law conditionally): propose
    lambda ~ InverseGaussian(1/|r|, 1), equivalently v from the matching
    generalized-inverse-Gaussian law, and squeeze the alternating
    acceptance series in v until the uniform draw is bracketed.
    """
    r = np.maximum(np.abs(np.asarray(resid, dtype=float)), 1e-8)
    out = np.empty_like(r)
    pending = np.ones(len(r), dtype=bool)
    while pending.any():
        idx = np.flatnonzero(pending)
        rr = r[idx]
        prec = rng.wald(1.0 / rr, 1.0)
        v = 1.0 / prec
        u = rng.uniform(size=len(idx))
        accept = np.zeros(len(idx), dtype=bool)
        big = v > 4.0 / 3.0
        if big.any():
            acc, _ = _ks_right_interval(v[big], u[big])
            accept[big] = acc
        small = ~big
        if small.any():
            acc, _ = _ks_left_interval(v[small], u[small])
            accept[small] = acc
        out[idx[accept]] = prec[accept]
        pending[idx[accept]] = False
    return out


def sample_lambda(rng, link, z, mu):
    """Precision draw lambda | z for one row or an array of rows.

    Probit: exactly 1. Student-t(nu): Gamma((nu+1)/2, (nu + (z-mu)^2)/2)
    in shape/rate form. Logit: Holmes-Held rejection draw.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    mu = np.broadcast_to(np.asarray(mu, dtype=float), z.shape)
    if isinstance(link, Probit):
        lam = np.ones_like(z)
    elif isinstance(link, StudentT):
        nu = link.nu
        rate = 0.5 * (nu + (z - mu) ** 2)
        lam = rng.gamma(0.5 * (nu + 1.0), 1.0 / rate)
    else:
        lam = _sample_lambda_logistic(rng, z - mu)
    return lam if lam.shape != (1,) else float(lam[0])
