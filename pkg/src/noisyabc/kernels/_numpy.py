"""Pure-numpy reference kernels.

Same signatures and semantics as :mod:`noisyabc.kernels._numba`; the numba
versions are loop-fused rewrites of these and the test-suite checks the two
agree to rounding.
"""

import numpy as np

HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


def stable_tau_grad(u1, u2, alpha, beta):
    """Chambers-Mallows-Stuck map (alpha != 1) and its alpha/beta partials.

    Returns ``(tau, d_alpha, d_beta)`` for the standardised variate
    (unit scale, zero location).
    """
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    T = np.tan(0.5 * np.pi * alpha)
    dT = 0.5 * np.pi * (1.0 + T * T)
    zeta = beta * T
    onez = 1.0 + zeta * zeta
    shift = np.arctan(zeta)  # alpha * B
    dshift_a = beta * dT / onez
    dshift_b = T / onez
    L = np.log(onez) / (2.0 * alpha)  # log S
    dL_a = -L / alpha + zeta * beta * dT / (alpha * onez)
    dL_b = zeta * T / (alpha * onez)
    p = (1.0 - alpha) / alpha
    dp_a = -1.0 / (alpha * alpha)

    c = alpha * u1 + shift
    w = (1.0 - alpha) * u1 - shift
    lcu = np.log(np.cos(u1))
    lcw = np.log(np.cos(w))
    lu2 = np.log(u2)
    E = L - lcu / alpha + p * (lcw - lu2)
    eE = np.exp(E)
    sc = np.sin(c)
    cc = np.cos(c)
    tau = sc * eE
    tw = np.tan(w)
    dE_a = dL_a + lcu / (alpha * alpha) + dp_a * (lcw - lu2) + p * tw * (u1 + dshift_a)
    dE_b = dL_b + p * tw * dshift_b
    d_alpha = cc * (u1 + dshift_a) * eE + tau * dE_a
    d_beta = cc * dshift_b * eE + tau * dE_b
    return tau, d_alpha, d_beta


def gk_tau_grad(z, g, k, A, B, c):
    """g-and-k quantile at standard-normal quantile ``z`` and its (g, k, A, B) partials."""
    z = np.asarray(z, dtype=float)
    h = np.tanh(0.5 * g * z)
    z2 = 1.0 + z * z
    base = z * z2**k
    skew = 1.0 + c * h
    q = A + B * skew * base
    grad = np.empty(z.shape + (4,))
    grad[..., 0] = B * c * (1.0 - h * h) * 0.5 * z * base
    grad[..., 1] = B * skew * base * np.log(z2)
    grad[..., 2] = 1.0
    grad[..., 3] = skew * base
    return q, grad


def _snis_combine(y, tau, grad, eps, use_psi):
    """Self-normalised IS score from per-sample outputs.

    y: (m,), tau: (m, N), grad: (m, N, d). Returns scores (m, d),
    log-likelihood estimates (m,) and ESS (m,).
    """
    n = tau.shape[1]
    with np.errstate(invalid="ignore", over="ignore"):
        if use_psi:
            center = np.arctan(tau)
            jac = 1.0 / (1.0 + tau * tau)
        else:
            center = tau
            jac = np.ones_like(tau)
        resid = y[:, None] - center
        logw = -0.5 * (resid / eps) ** 2
        dlogh = (resid / (eps * eps) * jac)[..., None] * grad
    bad = ~np.isfinite(tau)
    dlogh[bad] = 0.0
    if use_psi:
        logw[np.isnan(tau)] = -np.inf
    else:
        logw[bad] = -np.inf
    mx = np.max(logw, axis=1)
    safe = np.where(np.isfinite(mx), mx, 0.0)
    e = np.exp(logw - safe[:, None])
    s = e.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        W = e / s[:, None]
        scores = np.einsum("mn,mnd->md", W, dlogh)
        loglik = safe + np.log(s) - np.log(n) - np.log(eps) - HALF_LOG_2PI
        ess = 1.0 / np.sum(W * W, axis=1)
    return scores, loglik, ess


def stable_iid_scores(y, u1, u2, theta, eps, use_psi):
    alpha, beta, mu, sigma = theta
    std, da, db = stable_tau_grad(u1, u2, alpha, beta)
    tau = sigma * std + mu
    grad = np.stack([sigma * da, sigma * db, np.ones_like(std), std], axis=-1)
    return _snis_combine(np.asarray(y, dtype=float), tau, grad, eps, use_psi)


def gk_iid_scores(y, z, theta, c, eps, use_psi):
    g, k, A, B = theta
    q, grad = gk_tau_grad(z, g, k, A, B, c)
    return _snis_combine(np.asarray(y, dtype=float), q, grad, eps, use_psi)


def ar1_mixture(x_prev, logw_prev, acc_prev, x_new, phi, sigma2, delta, i_phi, i_s2, i_delta):
    """Marginalised O(N^2) transition term for a Gaussian AR(1) hidden chain.

    For every new particle i returns the f-weighted average over previous
    particles j of ``acc_prev[j] + grad log f(x_new[i] | x_prev[j])`` and the
    log of the mixture normaliser ``log sum_j W_j f(x_new[i] | x_prev[j])``.
    Gradient slots ``i_phi``, ``i_s2``, ``i_delta`` (``-1`` = absent) say where
    the AR(1) partials go in the parameter vector.
    """
    r = x_new[:, None] - phi * x_prev[None, :] - delta
    lw = logw_prev[None, :] - 0.5 * r * r / sigma2
    mx = lw.max(axis=1)
    e = np.exp(lw - mx[:, None])
    s = e.sum(axis=1)
    P = e / s[:, None]
    mix = P @ acc_prev
    if i_phi >= 0:
        mix[:, i_phi] += (P * r * x_prev[None, :]).sum(axis=1) / sigma2
    if i_s2 >= 0:
        mix[:, i_s2] += -0.5 / sigma2 + 0.5 * (P * r * r).sum(axis=1) / (sigma2 * sigma2)
    if i_delta >= 0:
        mix[:, i_delta] += (P * r).sum(axis=1) / sigma2
    log_denom = mx + np.log(s) - 0.5 * np.log(2.0 * np.pi * sigma2)
    return mix, log_denom
