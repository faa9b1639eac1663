"""Synthetic benchmark generator: a two-component normal mixture whose
weight, locations, and shape are driven by the first covariate only; the
remaining covariates are pure noise."""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass
class DunsonDesign:
    """Design for the mixture benchmark: n draws over p covariates, one
    active and p - 1 noise."""

    n: int
    p: int
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.p < 1:
            raise ConfigError("design requires n >= 1 and p >= 1")


def gen_dunson(rng, design):
    """Draw X ~ Uniform([0,1]^p) and, with w = exp(-2 X_1),
    Y ~ w Normal(X_1, 0.1^2) + (1 - w) Normal(X_1^4, 0.2^2).

    Returns raw-scale (X, y); standardization is the pipeline's job.
    """
    X = rng.uniform(size=(design.n, design.p))
    x1 = X[:, 0]
    w = np.exp(-2.0 * x1)
    pick_first = rng.uniform(size=design.n) < w
    loc = np.where(pick_first, x1, x1**4)
    sd = np.where(pick_first, 0.1, 0.2)
    y = loc + sd * rng.standard_normal(design.n)
    return X, y


def dunson_true_density(x1, y):
    """True conditional density of the mixture at covariate value x1."""
    y = np.asarray(y, dtype=float)
    w = math.exp(-2.0 * x1)
    c = 1.0 / math.sqrt(2.0 * math.pi)
    comp1 = (c / 0.1) * np.exp(-0.5 * ((y - x1) / 0.1) ** 2)
    comp2 = (c / 0.2) * np.exp(-0.5 * ((y - x1**4) / 0.2) ** 2)
    return w * comp1 + (1.0 - w) * comp2


def dunson_true_cdf(x1, y):
    """Conditional cdf of the mixture, for distribution-level checks."""
    from scipy import special

    y = np.asarray(y, dtype=float)
    w = math.exp(-2.0 * x1)
    comp1 = special.ndtr((y - x1) / 0.1)
    comp2 = special.ndtr((y - x1**4) / 0.2)
    return w * comp1 + (1.0 - w) * comp2
