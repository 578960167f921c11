"""Per-observation score estimates for models without hidden dynamics.

The score of a single noisy observation is the posterior mean of
grad log nu + grad log h^eps over u, estimated by self-normalised importance
sampling with nu itself as proposal.
"""

from __future__ import annotations

import numpy as np

from .core import corrupt_observations
from .errors import ConfigError, DegeneracyError, DomainError

DEFAULT_CHUNK = 256


def _check_model(model):
    if model.d_x != 0:
        raise DomainError(f"{model.name} has hidden dynamics; the i.i.d. estimator does not apply")


def iid_scores(y, model, theta, epsilon, n_samples, rng, use_psi=None, chunk=DEFAULT_CHUNK):
    """Scores, log-likelihood estimates and ESS for every entry of ``y``.

    Observations are processed in chunks of ``chunk`` to bound memory; the
    draws come from ``rng`` in order, so results depend only on the seed.
    """
    if n_samples < 2:
        raise ConfigError(f"need at least 2 importance samples, got {n_samples}")
    if epsilon <= 0:
        raise ConfigError(f"epsilon must be positive, got {epsilon!r}")
    _check_model(model)
    theta = model.check(theta)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    m = y.shape[0]
    scores = np.empty((m, model.d_theta))
    loglik = np.empty(m)
    ess = np.empty(m)
    for lo in range(0, m, chunk):
        hi = min(m, lo + chunk)
        s, ll, e = model.iid_scores(theta, y[lo:hi], n_samples, rng, epsilon, use_psi)
        scores[lo:hi], loglik[lo:hi], ess[lo:hi] = s, ll, e
    bad = ~np.isfinite(loglik)
    if bad.any():
        i = int(np.argmax(bad))
        raise DegeneracyError(
            f"all importance weights underflowed for observation {i} (epsilon={epsilon})",
            step=i, theta=theta, epsilon=epsilon,
        )
    return scores, loglik, ess


def iid_score(y, model, theta, epsilon, n_samples, rng, use_psi=None) -> np.ndarray:
    """Score estimate for one observation."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 0 and y.size != 1:
        raise ConfigError("iid_score takes a single observation; use iid_scores for a series")
    return iid_scores(y.reshape(1), model, theta, epsilon, n_samples, rng, use_psi)[0][0]


def gradient_histogram(raw, model, theta, epsilon, n_samples, use_psi, rng, noise_seed=None):
    """Corrupt ``raw`` with the epsilon-noise and return one score per observation.

    The noise draws come from ``noise_seed`` when given, otherwise from ``rng``.
    """
    raw = np.atleast_1d(np.asarray(raw, dtype=float))
    if raw.size < 1:
        raise ConfigError("gradient_histogram needs at least one observation")
    if noise_seed is None:
        noise_seed = rng.integers(2**63)
    y = corrupt_observations(raw, epsilon, use_psi, noise_seed).values
    return iid_scores(y, model, theta, epsilon, n_samples, rng, use_psi)[0]


def running_variance(samples) -> np.ndarray:
    """Unbiased running sample variance along axis 0 (NaN for the first row)."""
    x = np.asarray(samples, dtype=float)
    k = np.arange(1, x.shape[0] + 1).reshape((-1,) + (1,) * (x.ndim - 1))
    # shift by the first sample to limit cancellation
    d = x - x[:1]
    s1 = np.cumsum(d, axis=0)
    s2 = np.cumsum(d * d, axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        return (s2 - s1 * s1 / k) / (k - 1)


def histogram_bins(samples, bins=100):
    """Per-coordinate histogram (edges, counts) pairs."""
    x = np.asarray(samples, dtype=float)
    return [np.histogram(x[:, j], bins=bins) for j in range(x.shape[1])]
