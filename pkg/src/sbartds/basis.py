"""Random Fourier features for targeted smoothing.

A stationary kernel delta(y - y') with spectral law P(dw) satisfies

    delta(y - y') = E[2 cos(w y + b) cos(w y' + b)],   w ~ P, b ~ Uniform(0, 2pi),

so each tree's response-basis B(y) = sqrt(2) cos(w y + b) gives the kernel as
the expected product of features. Three families with known spectral samplers
are supported: squared exponential, Matern(nu), and Cauchy.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import ConfigError

SQRT2 = math.sqrt(2.0)

KERNEL_FAMILIES = ("se", "matern", "cauchy")


@dataclass(frozen=True)
class Kernel:
    """Shift-invariant correlation kernel with length scale rho."""

    family: str = "se"
    rho: float = 2.0 / math.pi
    nu: float = 1.0

    def __post_init__(self):
        if self.family not in KERNEL_FAMILIES:
            raise ConfigError(
                f"unknown kernel {self.family!r}; expected one of {KERNEL_FAMILIES}"
            )
        if not self.rho > 0:
            raise ConfigError("kernel length scale rho must be positive")
        if self.family == "matern" and not self.nu > 0:
            raise ConfigError("Matern kernel requires nu > 0")


def sample_basis(rng, kernel, size=None):
    """Draw (omega, b) from the kernel's spectral law and a uniform phase.

    Spectral laws: se -> Normal(0, rho^-2); matern(nu) -> t_nu scaled by
    rho^-1; cauchy -> Laplace with density (rho/2) exp(-rho |w|).
    """
    n = 1 if size is None else size
    if kernel.family == "se":
        omega = rng.normal(0.0, 1.0 / kernel.rho, n)
    elif kernel.family == "matern":
        omega = rng.standard_t(kernel.nu, n) / kernel.rho
    else:
        omega = rng.laplace(0.0, 1.0 / kernel.rho, n)
    b = rng.uniform(0.0, 2.0 * math.pi, n)
    if size is None:
        return float(omega[0]), float(b[0])
    return omega, b


def basis_eval(omega, b, y):
    """sqrt(2) cos(omega * y + b), broadcasting over the arguments."""
    return SQRT2 * np.cos(np.asarray(omega) * np.asarray(y) + np.asarray(b))


def kernel_cov(kernel, y, yp):
    """Closed-form correlation delta(y - y'); delta(0) = 1 exactly."""
    d = np.abs(np.asarray(y, dtype=float) - np.asarray(yp, dtype=float))
    rho = kernel.rho
    if kernel.family == "se":
        return np.exp(-0.5 * (d / rho) ** 2)
    if kernel.family == "cauchy":
        return 1.0 / (1.0 + (d / rho) ** 2)
    nu = kernel.nu
    if nu == 1.0:
        return np.exp(-d / rho)
    # Matern in the paper's parameterization: order nu/2 Bessel with
    # argument sqrt(nu) d / rho, normalized so delta(0) = 1.
    z = math.sqrt(nu) * d / rho
    half = nu / 2.0
    logc = (1.0 - half) * math.log(2.0) - special.gammaln(half)
    if not z.ndim:
        if not z > 0:
            return 1.0
        return float(np.exp(logc + half * np.log(z)) * special.kv(half, z))
    out = np.ones_like(z)
    pos = z > 0
    zp = z[pos]
    out[pos] = np.exp(logc + half * np.log(zp)) * special.kv(half, zp)
    return out
