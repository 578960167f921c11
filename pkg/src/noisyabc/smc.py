"""Bootstrap particle filter on the extended HMM with score estimation.

Two score estimators are available:

``"ON"``
    path-space accumulators that follow the resampled lineages (cost O(N));
``"ON2"``
    the marginalised recursion where each new particle averages the previous
    accumulators over the f-weighted mixture of all previous particles
    (cost O(N^2)).

Weights are handled in log space. Scores are with respect to the natural
(constrained) parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp, ndtr

from .core import grad_log_kernel, log_kernel, psi_transform
from .errors import ConfigError, DegeneracyError, EvaluationError

SCORE_METHODS = (None, "ON", "ON2")


@dataclass
class ParticleSystem:
    """State of the filter between two observations.

    ``x``/``u`` and ``scores`` are the particles and accumulators to propagate
    from (already resampled when resampling happened); ``log_weights`` are the
    matching normalised log weights. Fields prefixed ``last_`` describe the
    most recent weighting step before resampling.
    """

    x: np.ndarray
    u: np.ndarray
    log_weights: np.ndarray
    scores: np.ndarray
    log_likelihood: float = 0.0
    step: int = 0
    # pre-resampling particle set of the last step (needed by ON2)
    mix_x: np.ndarray | None = None
    mix_log_weights: np.ndarray | None = None
    mix_scores: np.ndarray | None = None
    # diagnostics of the last weighting step
    last_pred_log_weights: np.ndarray | None = None
    last_log_weights: np.ndarray | None = None
    last_centers: np.ndarray | None = None
    last_increment: float = 0.0
    ess: float = np.nan
    score_estimate: np.ndarray | None = None
    ancestors: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_particles(self) -> int:
        return self.log_weights.shape[0]


@dataclass
class ScoreEstimate:
    total_score: np.ndarray
    method: str


def ess(weights) -> float:
    """1 / sum W^2 for normalised weights."""
    w = np.asarray(weights, dtype=float)
    return float(1.0 / np.sum(w * w))


def ess_from_log(log_weights) -> float:
    lw = np.asarray(log_weights, dtype=float)
    return float(np.exp(2.0 * logsumexp(lw) - logsumexp(2.0 * lw)))


def systematic_resample(weights, rng) -> np.ndarray:
    """Ancestor indices from one uniform draw; offspring counts within 1 of N W_i."""
    w = np.asarray(weights, dtype=float)
    n = w.shape[0]
    positions = (rng.random() + np.arange(n)) / n
    cum = np.cumsum(w)
    cum[-1] = 1.0
    return np.searchsorted(cum, positions, side="right").clip(max=n - 1)


def pf_init(model, theta, n_particles, rng, score_method=None) -> ParticleSystem:
    """Draw z_1 ~ pi_theta for every particle; uniform weights, zero accumulators."""
    if n_particles < 2:
        raise ConfigError(f"need at least 2 particles, got {n_particles}")
    if score_method not in SCORE_METHODS:
        raise ConfigError(f"unknown score method {score_method!r}")
    theta = np.asarray(theta, dtype=float)
    x = model.sample_initial(theta, n_particles, rng)
    u = model.sample_aux(theta, x, rng)
    return ParticleSystem(
        x=x,
        u=u,
        log_weights=np.full(n_particles, -np.log(n_particles)),
        scores=np.zeros((n_particles, model.d_theta)),
    )


def _finite_or_raise(arr, what, theta, step):
    if not np.all(np.isfinite(arr)):
        raise EvaluationError(f"non-finite {what} at step {step}", theta=np.array(theta))


def pf_step(
    ps: ParticleSystem,
    y,
    model,
    theta,
    epsilon,
    rng,
    score_method=None,
    use_psi=None,
    resample_threshold=None,
) -> ParticleSystem:
    """Advance the filter by one observation.

    Prediction (skipped for the first observation, whose particles come from
    :func:`pf_init`), weighting by h^eps, likelihood update, score update and
    resampling. Resampling is systematic and happens every step unless
    ``resample_threshold`` (a fraction of N) is given, in which case it only
    happens when ESS falls below it; adaptive resampling is O(N)-only.
    """
    if epsilon <= 0:
        raise ConfigError(f"epsilon must be positive, got {epsilon!r}")
    if score_method not in SCORE_METHODS:
        raise ConfigError(f"unknown score method {score_method!r}")
    if resample_threshold is not None and score_method == "ON2":
        raise ConfigError("adaptive resampling is only supported with the O(N) score method")
    use_psi = model.uses_psi if use_psi is None else use_psi
    theta = np.asarray(theta, dtype=float)
    t = ps.step + 1
    n = ps.n_particles
    want_score = score_method is not None

    if ps.step == 0:
        x, u = ps.x, ps.u
        if want_score:
            acc = model.grad_log_initial(theta, x) + model.grad_log_aux(theta, x, u)
    else:
        x = model.sample_transition(theta, ps.x, rng)
        u = model.sample_aux(theta, x, rng)
        if score_method == "ON":
            acc = ps.scores + model.grad_log_transition(theta, ps.x, x) + model.grad_log_aux(theta, x, u)
        elif score_method == "ON2":
            mix, log_denom = model.mixture_transition_score(
                theta, ps.mix_x, ps.mix_log_weights, ps.mix_scores, x
            )
            if not np.all(np.isfinite(log_denom)):
                raise DegeneracyError(
                    f"O(N^2) mixture denominators underflowed at step {t}", step=t, theta=theta, epsilon=epsilon
                )
            acc = mix + model.grad_log_aux(theta, x, u)

    if want_score:
        tau, gtau = model.tau_and_grad(theta, x, u)
    else:
        tau = model.tau(theta, x, u)
    _finite_or_raise(tau, "tau output", theta, t)
    logh = log_kernel(y, tau, epsilon, use_psi)
    if want_score:
        acc = acc + grad_log_kernel(y, tau, gtau, epsilon, use_psi)

    pred_lw = ps.log_weights
    post = pred_lw + logh
    lse = logsumexp(post)
    if not np.isfinite(lse):
        raise DegeneracyError(
            f"all particle weights underflowed at step {t} (epsilon={epsilon})", step=t, theta=theta, epsilon=epsilon
        )
    logW = post - lse
    W = np.exp(logW)
    ess_t = float(1.0 / np.sum(W * W))
    score_est = None
    if want_score:
        score_est = W @ acc
        _finite_or_raise(score_est, "score estimate", theta, t)

    do_resample = resample_threshold is None or ess_t < resample_threshold * n
    if do_resample:
        anc = systematic_resample(W, rng)
        nx, nu = x[anc], u[anc]
        nlw = np.full(n, -np.log(n))
        nacc = acc[anc] if score_method == "ON" else (acc if want_score else ps.scores)
    else:
        anc = None
        nx, nu, nlw = x, u, logW
        nacc = acc if want_score else ps.scores

    centers = psi_transform(tau) if use_psi else tau
    keep_mix = score_method == "ON2"
    return ParticleSystem(
        x=nx,
        u=nu,
        log_weights=nlw,
        scores=nacc,
        log_likelihood=ps.log_likelihood + float(lse),
        step=t,
        mix_x=x if keep_mix else None,
        mix_log_weights=logW if keep_mix else None,
        mix_scores=acc if keep_mix else None,
        last_pred_log_weights=pred_lw,
        last_log_weights=logW,
        last_centers=centers,
        last_increment=float(lse),
        ess=ess_t,
        score_estimate=score_est,
        ancestors=anc,
    )


def conditional_cdf(ps: ParticleSystem, y, epsilon, weighting="predictive") -> float:
    """Particle estimate of P(Y^eps_t <= y | y_{1:t-1}) for the last weighted step.

    ``y`` must be on the same scale as the filter's centres (psi-transformed
    when the filter ran with psi). The default mixes the Gaussian kernel CDFs
    with the predictive weights (those carried into step t, i.e. before the
    time-t observation is seen). ``weighting="posterior"`` uses the time-t
    weights instead.
    """
    if ps.last_centers is None:
        raise ConfigError("conditional_cdf needs a particle system that has processed an observation")
    if weighting == "predictive":
        lw = ps.last_pred_log_weights
    elif weighting == "posterior":
        lw = ps.last_log_weights
    else:
        raise ConfigError(f"unknown weighting {weighting!r}")
    W = np.exp(lw - logsumexp(lw))
    val = float(W @ ndtr((y - ps.last_centers) / epsilon))
    return min(1.0, max(0.0, val))


@dataclass
class FilterResult:
    log_likelihood: float
    increments: np.ndarray
    ess: np.ndarray
    scores: np.ndarray | None
    cdf: np.ndarray | None
    system: ParticleSystem


def run_filter(
    y,
    model,
    theta,
    epsilon,
    n_particles,
    rng,
    score_method=None,
    use_psi=None,
    cdf_values=None,
    resample_threshold=None,
) -> FilterResult:
    """Run the filter over a whole series.

    ``scores[t]`` is the total-score estimate after t+1 observations.
    ``cdf_values``, when given, are evaluated through :func:`conditional_cdf` at
    every step (same scale as ``y`` as seen by the filter).
    """
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    theta = np.asarray(theta, dtype=float)
    incs = np.empty(n)
    esss = np.empty(n)
    scores = np.empty((n, model.d_theta)) if score_method else None
    cdf = np.empty(n) if cdf_values is not None else None
    ps = pf_init(model, theta, n_particles, rng, score_method)
    for t in range(n):
        ps = pf_step(ps, y[t], model, theta, epsilon, rng, score_method, use_psi, resample_threshold)
        incs[t] = ps.last_increment
        esss[t] = ps.ess
        if scores is not None:
            scores[t] = ps.score_estimate
        if cdf is not None:
            cdf[t] = conditional_cdf(ps, cdf_values[t], epsilon)
    return FilterResult(float(incs.sum()) if n else 0.0, incs, esss, scores, cdf, ps)


def estimate_log_likelihood(y, model, theta, epsilon, n_particles, rng, use_psi=None) -> float:
    """Log of the unbiased particle estimate of p_theta(y^eps_{1:n}); 0 for empty data."""
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        return 0.0
    return run_filter(y, model, theta, epsilon, n_particles, rng, None, use_psi).log_likelihood


def estimate_score(y, model, theta, epsilon, n_particles, rng, method="ON", use_psi=None) -> ScoreEstimate:
    """Total score estimate of log p_theta(y^eps_{1:n}) (natural coordinates)."""
    if method not in ("ON", "ON2"):
        raise ConfigError(f"unknown score method {method!r}")
    res = run_filter(y, model, theta, epsilon, n_particles, rng, method, use_psi)
    return ScoreEstimate(res.scores[-1].copy(), method)


def score_ON_update(model, theta, prev_scores, x_parent, x, u, y, epsilon, use_psi=None):
    """Path-space accumulator update for particles whose parents are ``x_parent``.

    ``prev_scores`` must already be indexed by ancestor. With ``x_parent`` None
    the first-step convention q(z_1 | z_0) = pi(z_1) applies.
    """
    use_psi = model.uses_psi if use_psi is None else use_psi
    if x_parent is None:
        acc = model.grad_log_initial(theta, x) + model.grad_log_aux(theta, x, u)
    else:
        acc = prev_scores + model.grad_log_transition(theta, x_parent, x) + model.grad_log_aux(theta, x, u)
    tau, gtau = model.tau_and_grad(theta, x, u)
    return acc + grad_log_kernel(y, tau, gtau, epsilon, use_psi)


def score_ON2_update(model, theta, prev_x, prev_log_weights, prev_scores, x, u, y, epsilon, use_psi=None, collapse=True):
    """Marginalised accumulator update over the previous weighted particle set."""
    use_psi = model.uses_psi if use_psi is None else use_psi
    if prev_x is None:
        acc = model.grad_log_initial(theta, x) + model.grad_log_aux(theta, x, u)
    else:
        mix, _ = model.mixture_transition_score(theta, prev_x, prev_log_weights, prev_scores, x, collapse=collapse)
        acc = mix + model.grad_log_aux(theta, x, u)
    tau, gtau = model.tau_and_grad(theta, x, u)
    return acc + grad_log_kernel(y, tau, gtau, epsilon, use_psi)


__all__ = [
    "FilterResult",
    "ParticleSystem",
    "ScoreEstimate",
    "conditional_cdf",
    "ess",
    "ess_from_log",
    "estimate_log_likelihood",
    "estimate_score",
    "pf_init",
    "pf_step",
    "run_filter",
    "score_ON2_update",
    "score_ON_update",
    "systematic_resample",
]
