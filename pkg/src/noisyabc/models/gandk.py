"""i.i.d. g-and-k observations: tau is the quantile function at a uniform draw."""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

from .. import kernels
from ..errors import DomainError
from ..params import Domain, Interval, REAL, positive
from .base import HMMModel

DEFAULT_C = 0.8


def _check_unit(u):
    u = np.asarray(u, dtype=float)
    if not np.all((u > 0.0) & (u < 1.0)):
        raise DomainError("g-and-k auxiliary variable must lie in (0, 1)")
    return u


def gk_quantile(u, theta, c=DEFAULT_C):
    """Q(u) = A + B [1 + c tanh(g z / 2)] (1 + z^2)^k z with z the normal quantile of u.

    ``(1 - e^{-gz}) / (1 + e^{-gz})`` is evaluated as ``tanh(gz/2)``.
    """
    g, k, A, B = theta
    z = ndtri(_check_unit(u))
    return kernels.gk_tau_grad(z, g, k, A, B, c)[0]


def gk_grad_quantile(u, theta, c=DEFAULT_C):
    """(dQ/dg, dQ/dk, dQ/dA, dQ/dB) with shape u.shape + (4,)."""
    g, k, A, B = theta
    z = ndtri(_check_unit(u))
    return kernels.gk_tau_grad(z, g, k, A, B, c)[1]


def sample_unit(shape, rng):
    u = rng.random(size=shape)
    # rng.random is on [0, 1); 0 has no normal quantile
    return np.where(u > 0.0, u, np.finfo(float).tiny)


class GandKModel(HMMModel):
    """theta = (g, k, A, B) with c fixed; u ~ Unif(0, 1) independent of theta."""

    name = "g_and_k"
    d_x = 0
    d_u = 1
    aux_depends_on_theta = False
    location_param = "A"

    def __init__(self, c: float = DEFAULT_C, uses_psi: bool = True):
        self.c = float(c)
        self.uses_psi = uses_psi

    @property
    def domain(self) -> Domain:
        return Domain(
            ("g", "k", "A", "B"),
            (REAL, Interval(-0.5, np.inf), REAL, positive(closed=True)),
        )

    def sample_aux(self, theta, x, rng):
        return sample_unit((x.shape[0], 1), rng)

    def log_aux(self, theta, x, u):
        return np.zeros(u.shape[0])

    def check_aux(self, u):
        _check_unit(u)

    def tau(self, theta, x, u):
        return gk_quantile(u[..., 0], theta, self.c)

    def tau_and_grad(self, theta, x, u):
        g, k, A, B = theta
        z = ndtri(_check_unit(u[..., 0]))
        return kernels.gk_tau_grad(z, g, k, A, B, self.c)

    def iid_scores(self, theta, y, n_samples, rng, epsilon, use_psi=None):
        use_psi = self.uses_psi if use_psi is None else use_psi
        y = np.atleast_1d(np.asarray(y, dtype=float))
        z = ndtri(sample_unit((y.shape[0], n_samples), rng))
        return kernels.gk_iid_scores(y, z, theta, self.c, epsilon, use_psi)


def heuristic_location(raw, n_head=100, method="median"):
    """Pre-centering estimate of A from the first min(n, n_head) observations.

    The median of a g-and-k law is exactly A (z = 0), so it is the default;
    ``method="mean"`` is also available.
    """
    raw = np.asarray(raw, dtype=float)
    head = raw[: min(raw.size, n_head)]
    if method == "median":
        return float(np.median(head))
    if method == "mean":
        return float(np.mean(head))
    raise ValueError(f"unknown location method {method!r}")
