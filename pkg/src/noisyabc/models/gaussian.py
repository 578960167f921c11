"""Linear-Gaussian surrogate whose noisy-ABC likelihood is exact via Kalman filtering.

Hidden chain as in the SV model (no drift), u ~ N(0, 1), tau = x + sigma_y u,
no psi. Then y^eps_t = x_t + sigma_y u_t + eps v_t is a scalar linear-Gaussian
state-space model with observation variance sigma_y^2 + eps^2.
"""

from __future__ import annotations

import numpy as np

from ..params import Domain, Interval, positive
from .base import AR1Dynamics, HMMModel


class GaussianSurrogateModel(AR1Dynamics, HMMModel):
    name = "gaussian_surrogate"
    d_x = 1
    d_u = 1
    uses_psi = False
    aux_depends_on_theta = False

    @property
    def domain(self) -> Domain:
        return Domain(("phi", "sigma2", "sigma_y"), (Interval(-1.0, 1.0), positive(), positive()))

    def sample_aux(self, theta, x, rng):
        return rng.standard_normal((x.shape[0], 1))

    def log_aux(self, theta, x, u):
        return -0.5 * u[:, 0] ** 2 - 0.5 * np.log(2.0 * np.pi)

    def tau_and_grad(self, theta, x, u):
        sigma_y = theta[2]
        tau = x[..., 0] + sigma_y * u[..., 0]
        grad = np.zeros(tau.shape + (3,))
        grad[..., 2] = u[..., 0]
        return tau, grad


def gaussian_surrogate_model(theta=None) -> GaussianSurrogateModel:
    model = GaussianSurrogateModel()
    if theta is not None:
        model.check(theta)
    return model


def kalman_log_likelihood(y, theta, epsilon, return_increments=False):
    """Exact log p_theta(y^eps_{1:n}) for the surrogate by the scalar Kalman filter."""
    phi, s2, sigma_y = (float(v) for v in theta)
    y = np.asarray(y, dtype=float)
    r = sigma_y**2 + epsilon**2
    m, P = 0.0, s2 / (1.0 - phi * phi)
    inc = np.empty(y.shape[0])
    for t, yt in enumerate(y):
        if t > 0:
            m = phi * m
            P = phi * phi * P + s2
        S = P + r
        e = yt - m
        inc[t] = -0.5 * (np.log(2.0 * np.pi * S) + e * e / S)
        K = P / S
        m = m + K * e
        P = (1.0 - K) * P
    total = float(inc.sum())
    return (total, inc) if return_increments else total


def kalman_score(y, theta, epsilon, step=1e-6):
    """Central finite differences of :func:`kalman_log_likelihood` (deterministic oracle)."""
    theta = np.asarray(theta, dtype=float)
    g = np.empty(theta.size)
    for i in range(theta.size):
        h = step * max(1.0, abs(theta[i]))
        tp, tm = theta.copy(), theta.copy()
        tp[i] += h
        tm[i] -= h
        g[i] = (kalman_log_likelihood(y, tp, epsilon) - kalman_log_likelihood(y, tm, epsilon)) / (2 * h)
    return g


def kalman_mle(y, epsilon, theta0):
    """Quasi-exact MLE of the surrogate: Nelder-Mead then BFGS on the unconstrained chart."""
    from scipy.optimize import minimize

    dom = GaussianSurrogateModel().domain

    def nll(v):
        return -kalman_log_likelihood(y, dom.from_unconstrained(v), epsilon)

    res = minimize(nll, dom.to_unconstrained(theta0), method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 20000, "maxfev": 40000})
    res = minimize(nll, res.x, method="BFGS", options={"gtol": 1e-9})
    return dom.from_unconstrained(res.x)
