"""Stochastic volatility with symmetric alpha-stable returns.

x_t = phi x_{t-1} + delta + N(0, sigma2), y_t = exp(x_t / 2) W_t with W_t
standard symmetric alpha-stable. ``delta`` is only part of theta in the
drift variant.
"""

from __future__ import annotations

import math

import numpy as np

from .. import kernels
from ..errors import DomainError
from ..params import Domain, Interval, REAL, positive
from .alpha_stable import DEFAULT_EXCLUSION, _check_u, exclusion_interval, sample_stable_aux, standard_stable_tau
from .base import AR1Dynamics, HMMModel


class SVAlphaRModel(AR1Dynamics, HMMModel):
    name = "sv_alpha_r"
    d_x = 1
    d_u = 2
    aux_depends_on_theta = False

    def __init__(self, drift: bool = False, uses_psi: bool = True, exclusion: float = DEFAULT_EXCLUSION):
        self.drift = drift
        self.uses_psi = uses_psi
        self.exclusion = exclusion

    @property
    def domain(self) -> Domain:
        names = ("alpha", "phi", "sigma2") + (("delta",) if self.drift else ())
        ivs = (
            Interval(0.0, 2.0, hi_closed=True),
            Interval(-1.0, 1.0),
            positive(),
        ) + ((REAL,) if self.drift else ())
        return Domain(names, ivs)

    def optimization_domain(self, theta0) -> Domain:
        return self.domain.replace("alpha", exclusion_interval(theta0[0], self.exclusion))

    def sample_aux(self, theta, x, rng):
        return sample_stable_aux(x.shape[0], rng)

    def log_aux(self, theta, x, u):
        return -math.log(math.pi) - u[:, 1]

    def check_aux(self, u):
        _check_u(u[..., 0], u[..., 1])

    def tau(self, theta, x, u):
        return np.exp(0.5 * x[..., 0]) * standard_stable_tau(u[..., 0], u[..., 1], theta[0], 0.0)

    def tau_and_grad(self, theta, x, u):
        alpha = theta[0]
        if abs(alpha - 1.0) < self.exclusion:
            raise DomainError(f"alpha={alpha} inside the exclusion zone |alpha - 1| < {self.exclusion}")
        _check_u(u[..., 0], u[..., 1])
        std, da, _ = kernels.stable_tau_grad(u[..., 0], u[..., 1], alpha, 0.0)
        scale = np.exp(0.5 * x[..., 0])
        grad = np.zeros(std.shape + (self.d_theta,))
        grad[..., 0] = scale * da
        return scale * std, grad


def svar_model(theta=None, drift=None, uses_psi=True, exclusion=DEFAULT_EXCLUSION) -> SVAlphaRModel:
    """Build the SVaR model; with ``theta`` given, the drift variant is inferred from its length."""
    if drift is None:
        drift = theta is not None and len(theta) == 4
    model = SVAlphaRModel(drift=drift, uses_psi=uses_psi, exclusion=exclusion)
    if theta is not None:
        model.check(theta)
    return model
