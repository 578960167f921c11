"""Noise corruption of data and the Gaussian ABC kernel on the extended HMM.

The extended model replaces the intractable observation density by a latent
auxiliary draw ``u`` and a deterministic map ``tau(theta, x, u)``; the observed
value is ``psi(tau) + eps * V`` with ``V`` standard normal. Everything here is
a pure function of its inputs and an explicit ``numpy.random.Generator``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, EvaluationError

HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


def psi_transform(y):
    """Componentwise arctangent; odd, strictly increasing, image in (-pi/2, pi/2)."""
    return np.arctan(y)


def psi_jacobian(y):
    return 1.0 / (1.0 + np.square(y))


@dataclass(frozen=True)
class ExtendedState:
    """Latent pair z = (x, u) for a batch of particles.

    ``x`` has shape (n, d_x) (d_x may be 0 for i.i.d. models) and ``u`` has
    shape (n, d_u).
    """

    x: np.ndarray
    u: np.ndarray

    def __len__(self):
        return self.u.shape[0]

    def take(self, idx) -> "ExtendedState":
        return ExtendedState(self.x[idx], self.u[idx])


@dataclass(frozen=True)
class NoisySeries:
    values: np.ndarray
    epsilon: float
    psi_applied: bool
    noise_seed: int | None

    def __len__(self):
        return len(self.values)


def corrupt_observations(raw, epsilon: float, use_psi: bool, seed) -> NoisySeries:
    """Add a single realisation of scaled standard-normal noise to the data.

    ``y_t = psi(raw_t) + eps * v_t`` when ``use_psi`` else ``raw_t + eps * v_t``.
    The noise stream is ``default_rng(seed)`` so a given seed always produces the
    same corrupted series.
    """
    if not np.isfinite(epsilon) or epsilon <= 0:
        raise ConfigError(f"epsilon must be a positive real, got {epsilon!r}")
    raw = np.asarray(raw, dtype=float)
    if raw.size == 0:
        raise ConfigError("cannot corrupt an empty series")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(raw.shape)
    base = psi_transform(raw) if use_psi else raw
    return NoisySeries(base + epsilon * v, float(epsilon), bool(use_psi), seed)


def log_kernel(y, tau, epsilon, use_psi):
    """log h: Gaussian density with scale ``epsilon`` centred at psi(tau) or tau."""
    center = psi_transform(tau) if use_psi else tau
    # an overflowing residual is a zero weight, handled downstream
    with np.errstate(over="ignore"):
        r = (y - center) / epsilon
        return -0.5 * r * r - np.log(epsilon) - HALF_LOG_2PI


def grad_log_kernel(y, tau, grad_tau, epsilon, use_psi):
    """Gradient of :func:`log_kernel` given d tau / d theta of shape (..., d)."""
    if use_psi:
        center = psi_transform(tau)
        jac = psi_jacobian(tau)
    else:
        center = tau
        jac = 1.0
    f = (y - center) / (epsilon * epsilon) * jac
    return np.asarray(f)[..., None] * grad_tau


def _checked_tau(model, theta, z: ExtendedState):
    tau = np.asarray(model.tau(theta, z.x, z.u), dtype=float)
    if not np.all(np.isfinite(tau)):
        bad = int(np.flatnonzero(~np.isfinite(np.atleast_1d(tau)))[0])
        raise EvaluationError(
            f"non-finite tau output for particle {bad}",
            theta=np.array(theta), state=(z.x[bad] if z.x.size else None, z.u[bad]),
        )
    return tau


def log_h_eps(y, z: ExtendedState, theta, epsilon, model, use_psi=None):
    """log h^eps(y | z) per particle for a batch state ``z``."""
    if epsilon <= 0:
        raise ConfigError(f"epsilon must be positive, got {epsilon!r}")
    use_psi = model.uses_psi if use_psi is None else use_psi
    tau = _checked_tau(model, theta, z)
    return log_kernel(y, tau, epsilon, use_psi)


def grad_log_h_eps(y, z: ExtendedState, theta, epsilon, model, use_psi=None):
    """theta-gradient of log h^eps(y | z), shape (n, d_theta), natural coordinates."""
    if epsilon <= 0:
        raise ConfigError(f"epsilon must be positive, got {epsilon!r}")
    use_psi = model.uses_psi if use_psi is None else use_psi
    tau, gtau = model.tau_and_grad(theta, z.x, z.u)
    if not np.all(np.isfinite(tau)):
        _checked_tau(model, theta, z)
    return grad_log_kernel(y, tau, gtau, epsilon, use_psi)
