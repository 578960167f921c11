"""Loop-fused numba kernels mirroring :mod:`noisyabc.kernels._numpy`.

No ``fastmath`` and no parallel reductions: results are bit-reproducible and
agree with the numpy path to rounding.
"""

import math

import numpy as np

from .._accel import njit

HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


@njit(cache=True)
def _stable_consts(alpha, beta):
    T = math.tan(0.5 * math.pi * alpha)
    dT = 0.5 * math.pi * (1.0 + T * T)
    zeta = beta * T
    onez = 1.0 + zeta * zeta
    shift = math.atan(zeta)
    dshift_a = beta * dT / onez
    dshift_b = T / onez
    L = math.log(onez) / (2.0 * alpha)
    dL_a = -L / alpha + zeta * beta * dT / (alpha * onez)
    dL_b = zeta * T / (alpha * onez)
    return shift, dshift_a, dshift_b, L, dL_a, dL_b


@njit(cache=True)
def _stable_point(u1, u2, alpha, shift, dshift_a, dshift_b, L, dL_a, dL_b):
    p = (1.0 - alpha) / alpha
    dp_a = -1.0 / (alpha * alpha)
    c = alpha * u1 + shift
    w = (1.0 - alpha) * u1 - shift
    lcu = math.log(math.cos(u1))
    lcw = math.log(math.cos(w))
    lu2 = math.log(u2)
    E = L - lcu / alpha + p * (lcw - lu2)
    eE = math.exp(E)
    sc = math.sin(c)
    cc = math.cos(c)
    tau = sc * eE
    tw = math.tan(w)
    dE_a = dL_a + lcu / (alpha * alpha) + dp_a * (lcw - lu2) + p * tw * (u1 + dshift_a)
    dE_b = dL_b + p * tw * dshift_b
    da = cc * (u1 + dshift_a) * eE + tau * dE_a
    db = cc * dshift_b * eE + tau * dE_b
    return tau, da, db


@njit(cache=True)
def _stable_tau_grad_flat(u1, u2, alpha, beta):
    n = u1.shape[0]
    tau = np.empty(n)
    da = np.empty(n)
    db = np.empty(n)
    shift, dsa, dsb, L, dLa, dLb = _stable_consts(alpha, beta)
    for i in range(n):
        tau[i], da[i], db[i] = _stable_point(u1[i], u2[i], alpha, shift, dsa, dsb, L, dLa, dLb)
    return tau, da, db


def stable_tau_grad(u1, u2, alpha, beta):
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    shape = np.broadcast_shapes(u1.shape, u2.shape)
    a = np.ascontiguousarray(np.broadcast_to(u1, shape)).ravel()
    b = np.ascontiguousarray(np.broadcast_to(u2, shape)).ravel()
    tau, da, db = _stable_tau_grad_flat(a, b, float(alpha), float(beta))
    return tau.reshape(shape), da.reshape(shape), db.reshape(shape)


@njit(cache=True)
def _gk_point(z, g, k, A, B, c):
    h = math.tanh(0.5 * g * z)
    z2 = 1.0 + z * z
    base = z * z2**k
    skew = 1.0 + c * h
    q = A + B * skew * base
    dg = B * c * (1.0 - h * h) * 0.5 * z * base
    dk = B * skew * base * math.log(z2)
    dB = skew * base
    return q, dg, dk, dB


@njit(cache=True)
def _gk_tau_grad_flat(z, g, k, A, B, c):
    n = z.shape[0]
    q = np.empty(n)
    grad = np.empty((n, 4))
    for i in range(n):
        qi, dg, dk, dB = _gk_point(z[i], g, k, A, B, c)
        q[i] = qi
        grad[i, 0] = dg
        grad[i, 1] = dk
        grad[i, 2] = 1.0
        grad[i, 3] = dB
    return q, grad


def gk_tau_grad(z, g, k, A, B, c):
    z = np.asarray(z, dtype=float)
    q, grad = _gk_tau_grad_flat(np.ascontiguousarray(z).ravel(), float(g), float(k), float(A), float(B), float(c))
    return q.reshape(z.shape), grad.reshape(z.shape + (4,))


@njit(cache=True)
def _finish_row(y, tau_row, grad_row, eps, use_psi, logw, gh):
    """Turn one observation's samples into (score, loglik, ess); scratch arrays reused."""
    n = tau_row.shape[0]
    d = grad_row.shape[1]
    inv_e = 1.0 / eps
    mx = -np.inf
    for i in range(n):
        t = tau_row[i]
        if math.isfinite(t):
            if use_psi:
                center = math.atan(t)
                jac = 1.0 / (1.0 + t * t)
            else:
                center = t
                jac = 1.0
            z = (y - center) * inv_e
            logw[i] = -0.5 * z * z
            f = z * inv_e * jac
            for k in range(d):
                gh[i, k] = f * grad_row[i, k]
        else:
            if use_psi and not math.isnan(t):
                z = (y - math.copysign(0.5 * math.pi, t)) * inv_e
                logw[i] = -0.5 * z * z
            else:
                logw[i] = -np.inf
            for k in range(d):
                gh[i, k] = 0.0
        if logw[i] > mx:
            mx = logw[i]
    score = np.zeros(d)
    if not math.isfinite(mx):
        return score * math.nan, -np.inf, math.nan
    s = 0.0
    for i in range(n):
        logw[i] = math.exp(logw[i] - mx)
        s += logw[i]
    s2 = 0.0
    for i in range(n):
        Wi = logw[i] / s
        s2 += Wi * Wi
        if Wi != 0.0:
            for k in range(d):
                score[k] += Wi * gh[i, k]
    loglik = mx + math.log(s) - math.log(n) - math.log(eps) - HALF_LOG_2PI
    return score, loglik, 1.0 / s2


@njit(cache=True)
def _stable_iid_scores(y, u1, u2, alpha, beta, mu, sigma, eps, use_psi):
    m, n = u1.shape
    scores = np.empty((m, 4))
    loglik = np.empty(m)
    ess = np.empty(m)
    tau = np.empty(n)
    grad = np.empty((n, 4))
    logw = np.empty(n)
    gh = np.empty((n, 4))
    shift, dsa, dsb, L, dLa, dLb = _stable_consts(alpha, beta)
    for j in range(m):
        for i in range(n):
            t, da, db = _stable_point(u1[j, i], u2[j, i], alpha, shift, dsa, dsb, L, dLa, dLb)
            tau[i] = sigma * t + mu
            grad[i, 0] = sigma * da
            grad[i, 1] = sigma * db
            grad[i, 2] = 1.0
            grad[i, 3] = t
        sc, ll, es = _finish_row(y[j], tau, grad, eps, use_psi, logw, gh)
        scores[j, :] = sc
        loglik[j] = ll
        ess[j] = es
    return scores, loglik, ess


def stable_iid_scores(y, u1, u2, theta, eps, use_psi):
    alpha, beta, mu, sigma = (float(v) for v in theta)
    return _stable_iid_scores(
        np.ascontiguousarray(y, dtype=float),
        np.ascontiguousarray(u1, dtype=float),
        np.ascontiguousarray(u2, dtype=float),
        alpha, beta, mu, sigma, float(eps), bool(use_psi),
    )


@njit(cache=True)
def _gk_iid_scores(y, z, g, k, A, B, c, eps, use_psi):
    m, n = z.shape
    scores = np.empty((m, 4))
    loglik = np.empty(m)
    ess = np.empty(m)
    tau = np.empty(n)
    grad = np.empty((n, 4))
    logw = np.empty(n)
    gh = np.empty((n, 4))
    for j in range(m):
        for i in range(n):
            q, dg, dk, dB = _gk_point(z[j, i], g, k, A, B, c)
            tau[i] = q
            grad[i, 0] = dg
            grad[i, 1] = dk
            grad[i, 2] = 1.0
            grad[i, 3] = dB
        sc, ll, es = _finish_row(y[j], tau, grad, eps, use_psi, logw, gh)
        scores[j, :] = sc
        loglik[j] = ll
        ess[j] = es
    return scores, loglik, ess


def gk_iid_scores(y, z, theta, c, eps, use_psi):
    g, k, A, B = (float(v) for v in theta)
    return _gk_iid_scores(
        np.ascontiguousarray(y, dtype=float),
        np.ascontiguousarray(z, dtype=float),
        g, k, A, B, float(c), float(eps), bool(use_psi),
    )


@njit(cache=True)
def _ar1_mixture(x_prev, logw_prev, acc_prev, x_new, phi, sigma2, delta, i_phi, i_s2, i_delta):
    m = x_new.shape[0]
    n = x_prev.shape[0]
    d = acc_prev.shape[1]
    mix = np.zeros((m, d))
    log_denom = np.empty(m)
    lw = np.empty(n)
    half_inv = 0.5 / sigma2
    norm_const = 0.5 * math.log(2.0 * math.pi * sigma2)
    for i in range(m):
        xi = x_new[i]
        mx = -np.inf
        for j in range(n):
            r = xi - phi * x_prev[j] - delta
            lw[j] = logw_prev[j] - half_inv * r * r
            if lw[j] > mx:
                mx = lw[j]
        s = 0.0
        g_phi = 0.0
        g_s2 = 0.0
        g_delta = 0.0
        for j in range(n):
            e = math.exp(lw[j] - mx)
            if e == 0.0:
                continue
            s += e
            r = xi - phi * x_prev[j] - delta
            for k in range(d):
                mix[i, k] += e * acc_prev[j, k]
            g_phi += e * r * x_prev[j]
            g_s2 += e * r * r
            g_delta += e * r
        for k in range(d):
            mix[i, k] /= s
        if i_phi >= 0:
            mix[i, i_phi] += g_phi / s / sigma2
        if i_s2 >= 0:
            mix[i, i_s2] += -0.5 / sigma2 + 0.5 * (g_s2 / s) / (sigma2 * sigma2)
        if i_delta >= 0:
            mix[i, i_delta] += g_delta / s / sigma2
        log_denom[i] = mx + math.log(s) - norm_const
    return mix, log_denom


def ar1_mixture(x_prev, logw_prev, acc_prev, x_new, phi, sigma2, delta, i_phi, i_s2, i_delta):
    return _ar1_mixture(
        np.ascontiguousarray(x_prev, dtype=float),
        np.ascontiguousarray(logw_prev, dtype=float),
        np.ascontiguousarray(acc_prev, dtype=float),
        np.ascontiguousarray(x_new, dtype=float),
        float(phi), float(sigma2), float(delta), int(i_phi), int(i_s2), int(i_delta),
    )
