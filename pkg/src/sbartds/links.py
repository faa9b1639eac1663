"""Link functions Phi mapping the ensemble output r(y, x) to an acceptance
probability in (0, 1).

Each link is the cdf of a symmetric location family with scale 1 (normal,
logistic, or Student-t), which is exactly the family used for the latent
utilities: Z = r + eps with eps drawn from the link's standard member.
"""

import math

import numpy as np
from scipy import special

from .errors import ConfigError

_SQRT_2PI = math.sqrt(2.0 * math.pi)


class Probit:
    name = "probit"

    def cdf(self, mu):
        return special.ndtr(mu)

    def density(self, mu):
        mu = np.asarray(mu, dtype=float)
        return np.exp(-0.5 * mu * mu) / _SQRT_2PI

    def log_cdf(self, mu):
        return special.log_ndtr(mu)

    def condition_l_constant(self):
        # density/cdf is unbounded below: no finite Lipschitz constant.
        return math.inf


class Logit:
    name = "logit"

    def cdf(self, mu):
        return special.expit(mu)

    def density(self, mu):
        p = special.expit(mu)
        return p * special.expit(-np.asarray(mu, dtype=float))

    def log_cdf(self, mu):
        # -log1p(exp(-mu)), evaluated stably in both tails.
        return special.log_expit(mu)

    def condition_l_constant(self):
        return 1.0


class StudentT:
    """Student-t link with nu degrees of freedom (scale 1)."""

    name = "t"

    def __init__(self, nu):
        if not nu > 0:
            raise ConfigError(f"Student-t link requires nu > 0, got {nu}")
        self.nu = float(nu)

    def cdf(self, mu):
        # Regularized incomplete beta, via the tail-direct t cdf.
        return special.stdtr(self.nu, np.asarray(mu, dtype=float))

    def density(self, mu):
        mu = np.asarray(mu, dtype=float)
        nu = self.nu
        logc = (
            special.gammaln((nu + 1.0) / 2.0)
            - special.gammaln(nu / 2.0)
            - 0.5 * math.log(nu * math.pi)
        )
        return np.exp(logc - 0.5 * (nu + 1.0) * np.log1p(mu * mu / nu))

    def log_cdf(self, mu):
        mu = np.asarray(mu, dtype=float)
        p = special.stdtr(self.nu, mu)
        out = np.full(mu.shape, -np.inf)
        ok = p > 0.0
        out[ok] = np.log(p[ok])
        if not ok.all():
            # Deep-tail expansion where the cdf underflows:
            # F(mu) ~ c_nu * nu^((nu-1)/2) * |mu|^(-nu) as mu -> -inf.
            nu = self.nu
            logc = (
                special.gammaln((nu + 1.0) / 2.0)
                - special.gammaln(nu / 2.0)
                - 0.5 * math.log(nu * math.pi)
            )
            far = ~ok
            out[far] = (
                logc
                - math.log(nu)
                + 0.5 * (nu + 1.0) * math.log(nu)
                - nu * np.log(np.abs(mu[far]))
            )
        return out if out.ndim else float(out)

    def condition_l_constant(self):
        return math.sqrt(self.nu)


def link_eval(link, mu):
    """Evaluate one link at mu, returning (cdf, density, logcdf)."""
    return link.cdf(mu), link.density(mu), link.log_cdf(mu)


def condition_l_constant(link):
    """Ratio bound K with density(mu)/cdf(mu) <= K, or inf when unbounded."""
    return link.condition_l_constant()


def get_link(name, nu=None):
    if name == "probit":
        return Probit()
    if name == "logit":
        return Logit()
    if name == "t":
        if nu is None:
            raise ConfigError("link 't' requires a degrees-of-freedom value nu")
        return StudentT(nu)
    raise ConfigError(f"unknown link {name!r}; expected probit, logit, or t")
