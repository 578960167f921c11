"""i.i.d. alpha-stable observations through the Chambers-Mallows-Stuck map."""

from __future__ import annotations

import math

import numpy as np

from .. import kernels
from ..errors import DomainError
from ..params import Domain, Interval, REAL, positive
from .base import HMMModel

HALF_PI = 0.5 * math.pi
DEFAULT_EXCLUSION = 0.05


def stable_constants(alpha, beta):
    """Return (B, S) of the CMS map for alpha != 1."""
    t = math.tan(HALF_PI * alpha)
    B = math.atan(beta * t) / alpha
    S = (1.0 + beta * beta * t * t) ** (1.0 / (2.0 * alpha))
    return B, S


def _check_u(u1, u2):
    if not (np.all(np.abs(u1) < HALF_PI) and np.all(u2 > 0)):
        raise DomainError("alpha-stable auxiliary variables need u1 in (-pi/2, pi/2) and u2 > 0")


def _standard_alpha_one(u1, u2, beta):
    """alpha == 1 branch (value and d/d beta)."""
    a = HALF_PI + beta * u1
    lg = np.log(u2 * np.cos(u1) / a)
    val = (2.0 / math.pi) * (a * np.tan(u1) - beta * lg)
    d_beta = (2.0 / math.pi) * (u1 * np.tan(u1) - lg + beta * u1 / a)
    return val, d_beta


def standard_stable_tau(u1, u2, alpha, beta):
    """Unit-scale, zero-location CMS variate for auxiliary draws (u1, u2)."""
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    _check_u(u1, u2)
    if alpha == 1.0:
        return _standard_alpha_one(u1, u2, beta)[0]
    return kernels.stable_tau_grad(u1, u2, alpha, beta)[0]


def alpha_stable_tau(u, theta):
    """sigma * tau_{alpha,beta}(u) + mu for u of shape (..., 2)."""
    alpha, beta, mu, sigma = theta
    u = np.asarray(u, dtype=float)
    return sigma * standard_stable_tau(u[..., 0], u[..., 1], alpha, beta) + mu


def alpha_stable_grad_tau(u, theta, exclusion=DEFAULT_EXCLUSION):
    """Analytic (d/d alpha, d/d beta, d/d mu, d/d sigma) of :func:`alpha_stable_tau`."""
    alpha, beta, mu, sigma = theta
    if abs(alpha - 1.0) < exclusion:
        raise DomainError(f"alpha={alpha} inside the exclusion zone |alpha - 1| < {exclusion}")
    u = np.asarray(u, dtype=float)
    _check_u(u[..., 0], u[..., 1])
    std, da, db = kernels.stable_tau_grad(u[..., 0], u[..., 1], alpha, beta)
    return np.stack([sigma * da, sigma * db, np.ones_like(std), std], axis=-1)


def sample_stable_aux(shape, rng):
    """(U1, U2) with U1 ~ Unif(-pi/2, pi/2), U2 ~ Exp(1); trailing axis of size 2."""
    u1 = rng.uniform(-HALF_PI, HALF_PI, size=shape)
    u2 = rng.standard_exponential(size=shape)
    # keep strictly inside the open support
    u1 = np.clip(u1, math.nextafter(-HALF_PI, 0.0), math.nextafter(HALF_PI, 0.0))
    u2 = np.maximum(u2, np.finfo(float).tiny)
    return np.stack([u1, u2], axis=-1)


def exclusion_interval(alpha0, radius, upper=2.0):
    if alpha0 > 1.0:
        return Interval(1.0 + radius, upper, lo_closed=True, hi_closed=True)
    return Interval(0.0, 1.0 - radius, hi_closed=True)


class AlphaStableModel(HMMModel):
    """theta = (alpha, beta, mu, sigma); u = (U1, U2) independent of theta."""

    name = "alpha_stable"
    d_x = 0
    d_u = 2
    aux_depends_on_theta = False
    location_param = "mu"

    def __init__(self, uses_psi: bool = True, exclusion: float = DEFAULT_EXCLUSION):
        self.uses_psi = uses_psi
        self.exclusion = exclusion

    @property
    def domain(self) -> Domain:
        return Domain(
            ("alpha", "beta", "mu", "sigma"),
            (
                Interval(0.0, 2.0, hi_closed=True),
                Interval(-1.0, 1.0, lo_closed=True, hi_closed=True),
                REAL,
                positive(closed=True),
            ),
        )

    def optimization_domain(self, theta0) -> Domain:
        return self.domain.replace("alpha", exclusion_interval(theta0[0], self.exclusion))

    def sample_aux(self, theta, x, rng):
        return sample_stable_aux(x.shape[0], rng)

    def log_aux(self, theta, x, u):
        return -math.log(math.pi) - u[:, 1]

    def check_aux(self, u):
        _check_u(u[..., 0], u[..., 1])

    def tau(self, theta, x, u):
        return alpha_stable_tau(u, theta)

    def tau_and_grad(self, theta, x, u):
        alpha, beta, mu, sigma = theta
        if abs(alpha - 1.0) < self.exclusion:
            raise DomainError(f"alpha={alpha} inside the exclusion zone |alpha - 1| < {self.exclusion}")
        _check_u(u[..., 0], u[..., 1])
        std, da, db = kernels.stable_tau_grad(u[..., 0], u[..., 1], alpha, beta)
        grad = np.stack([sigma * da, sigma * db, np.ones_like(std), std], axis=-1)
        return sigma * std + mu, grad

    def iid_scores(self, theta, y, n_samples, rng, epsilon, use_psi=None):
        use_psi = self.uses_psi if use_psi is None else use_psi
        if abs(theta[0] - 1.0) < self.exclusion:
            raise DomainError(f"alpha={theta[0]} inside the exclusion zone")
        y = np.atleast_1d(np.asarray(y, dtype=float))
        u = sample_stable_aux((y.shape[0], n_samples), rng)
        return kernels.stable_iid_scores(y, u[..., 0], u[..., 1], theta, epsilon, use_psi)
