"""Stochastic gradient ascent on the noisy-ABC log-likelihood.

Both drivers update in unconstrained coordinates (see :mod:`noisyabc.params`)
and record iterates back in the natural parameterisation.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field

import numpy as np

from . import smc
from .errors import ConfigError, DegeneracyError, EvaluationError
from .iid import iid_scores


@dataclass(frozen=True)
class Schedule:
    """gamma_j = a (j + t0)^(-b), times a per-coordinate multiplier.

    Updates are clipped per coordinate to ``clip * gamma_j * scales[k]``.
    ``a = 0`` freezes theta (useful for likelihood traces at fixed theta).
    """

    a: float = 0.1
    b: float = 0.6
    t0: int = 0
    scales: tuple | None = None
    clip: float = 10.0

    def __post_init__(self):
        if not (self.a >= 0 and np.isfinite(self.a)):
            raise ConfigError(f"schedule scale a must be >= 0, got {self.a!r}")
        if not 0.5 < self.b <= 1.0:
            raise ConfigError(f"schedule exponent b must lie in (0.5, 1], got {self.b!r}")
        if int(self.t0) != self.t0 or self.t0 < 0:
            raise ConfigError(f"schedule offset t0 must be a nonnegative integer, got {self.t0!r}")
        if self.scales is not None and any(not (s > 0) for s in self.scales):
            raise ConfigError("schedule multipliers must be positive")
        if not self.clip > 0:
            raise ConfigError("clip factor must be positive")

    def gamma(self, j: int) -> float:
        return self.a * (j + self.t0) ** (-self.b)

    def multipliers(self, d: int) -> np.ndarray:
        if self.scales is None:
            return np.ones(d)
        if len(self.scales) != d:
            raise ConfigError(f"schedule has {len(self.scales)} multipliers for {d} parameters")
        return np.asarray(self.scales, dtype=float)

    def step(self, j: int, grad_u) -> tuple[np.ndarray, int]:
        """Clipped update for iteration ``j`` (1-based) and the number of clipped coordinates."""
        grad_u = np.asarray(grad_u, dtype=float)
        g = self.gamma(j) * self.multipliers(grad_u.size)
        raw = g * grad_u
        bound = self.clip * g
        clipped = np.abs(raw) > bound
        return np.clip(raw, -bound, bound), int(clipped.sum())

    def as_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "t0": self.t0,
                "scales": None if self.scales is None else list(self.scales), "clip": self.clip}


@dataclass
class RunRecord:
    """Trace of a gradient-ascent run, one row per iteration or observation.

    ``theta[j]`` is the estimate after update j; ``grad[j]`` the score
    estimate (natural coordinates) that drove it, evaluated at ``theta[j-1]``
    (``theta0`` for the first row). ``loglik`` is the full-pass log-likelihood
    estimate for batch runs and the per-observation increment for online runs.
    """

    names: tuple
    theta0: np.ndarray
    theta: np.ndarray
    grad: np.ndarray
    ess: np.ndarray
    loglik: np.ndarray
    clipped: np.ndarray
    wall: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.theta.shape[0]

    @classmethod
    def empty(cls, names, theta0, n, timed=False, meta=None):
        d = len(names)
        return cls(
            names=tuple(names),
            theta0=np.array(theta0, dtype=float),
            theta=np.full((n, d), np.nan),
            grad=np.full((n, d), np.nan),
            ess=np.full(n, np.nan),
            loglik=np.full(n, np.nan),
            clipped=np.zeros(n, dtype=np.int64),
            wall=np.full(n, np.nan) if timed else None,
            meta=dict(meta or {}),
        )

    def truncate(self, n: int) -> "RunRecord":
        return RunRecord(self.names, self.theta0, self.theta[:n], self.grad[:n], self.ess[:n],
                         self.loglik[:n], self.clipped[:n], None if self.wall is None else self.wall[:n],
                         dict(self.meta))

    def final_estimate(self, last: int = 1000) -> np.ndarray:
        """Average of the last ``last`` iterates (all of them if fewer)."""
        if len(self) == 0:
            return self.theta0.copy()
        return self.theta[-min(last, len(self)):].mean(axis=0)

    @property
    def columns(self) -> list:
        cols = ["step"] + [f"theta_{n}" for n in self.names] + [f"grad_{n}" for n in self.names]
        cols += ["ess", "loglik", "clipped"]
        if self.wall is not None:
            cols.append("wall_seconds")
        return cols

    def to_csv(self, path=None, provenance=None) -> str:
        """Write the trace (floats in round-trip repr); returns the text.

        ``provenance`` becomes a leading ``#`` comment line.
        """
        buf = io.StringIO()
        if provenance:
            buf.write(f"# {provenance}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        w.writerow([0] + [repr(float(v)) for v in self.theta0] + [""] * len(self.names) + ["", "", ""]
                   + ([""] if self.wall is not None else []))
        for j in range(len(self)):
            row = [j + 1]
            row += [repr(float(v)) for v in self.theta[j]]
            row += [repr(float(v)) for v in self.grad[j]]
            row += [repr(float(self.ess[j])), repr(float(self.loglik[j])), int(self.clipped[j])]
            if self.wall is not None:
                row.append(repr(float(self.wall[j])))
            w.writerow(row)
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path_or_text, meta=None) -> "RunRecord":
        if "\n" in str(path_or_text):
            text = str(path_or_text)
        else:
            with open(path_or_text, newline="") as fh:
                text = fh.read()
        lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
        rows = list(csv.reader(lines))
        header, first, body = rows[0], rows[1], rows[2:]
        names = tuple(c[len("theta_"):] for c in header if c.startswith("theta_"))
        d = len(names)
        timed = header[-1] == "wall_seconds"
        rec = cls.empty(names, [float(v) for v in first[1:1 + d]], len(body), timed, meta)
        for j, row in enumerate(body):
            rec.theta[j] = [float(v) for v in row[1:1 + d]]
            rec.grad[j] = [float(v) for v in row[1 + d:1 + 2 * d]]
            rec.ess[j] = float(row[1 + 2 * d])
            rec.loglik[j] = float(row[2 + 2 * d])
            rec.clipped[j] = int(row[3 + 2 * d])
            if timed:
                rec.wall[j] = float(row[4 + 2 * d])
        return rec


def _prepare(model, theta0, schedule):
    if schedule is None:
        schedule = Schedule()
    theta0 = model.check(theta0)
    dom = model.optimization_domain(theta0)
    dom.check(theta0)
    schedule.multipliers(model.d_theta)
    return theta0, dom, schedule


def _update(dom, schedule, j, theta, grad):
    grad_u = dom.grad_to_unconstrained(theta, grad)
    step, n_clip = schedule.step(j, grad_u)
    v = dom.to_unconstrained(theta) + step
    if not np.all(np.isfinite(v)):
        raise EvaluationError(f"non-finite update at iteration {j}", theta=theta)
    new = dom.from_unconstrained(v)
    dom.check(new)
    return new, n_clip


def _full_pass_score(y, model, theta, epsilon, n_particles, rng, score_method, use_psi):
    """(total score, log-likelihood estimate, mean ESS) for one pass over ``y``."""
    if model.d_x == 0:
        s, ll, e = iid_scores(y, model, theta, epsilon, n_particles, rng, use_psi)
        return s.sum(axis=0), float(ll.sum()), float(e.mean())
    res = smc.run_filter(y, model, theta, epsilon, n_particles, rng, score_method, use_psi)
    return res.scores[-1], res.log_likelihood, float(res.ess.mean())


def batch_gradient_ascent(
    y,
    model,
    theta0,
    epsilon,
    n_particles,
    schedule=None,
    score_method="ON",
    iterations=1000,
    rng=None,
    use_psi=None,
    normalize=True,
    score_fn=None,
    record_time=False,
    callback=None,
) -> RunRecord:
    """theta_j = theta_{j-1} + gamma_j * score(theta_{j-1}), one full data pass per iteration.

    With ``normalize`` the score is divided by the data length, so the schedule
    is on the per-observation scale. ``score_fn(theta) -> (score, loglik, ess)``
    replaces the particle estimate (e.g. an exact score for tests). Models
    without hidden dynamics use the importance-sampling estimator per
    observation, which is what the filter reduces to for them.
    """
    if iterations < 1:
        raise ConfigError(f"iterations must be >= 1, got {iterations}")
    if score_method not in ("ON", "ON2"):
        raise ConfigError(f"unknown score method {score_method!r}")
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise ConfigError("empty data series")
    rng = np.random.default_rng() if rng is None else rng
    theta, dom, schedule = _prepare(model, theta0, schedule)
    rec = RunRecord.empty(model.param_names, theta, iterations, record_time,
                          {"driver": "batch", "score_method": score_method, "schedule": schedule.as_dict()})
    scale = 1.0 / y.shape[0] if normalize else 1.0
    for j in range(1, iterations + 1):
        t_start = time.perf_counter() if record_time else 0.0
        try:
            if score_fn is None:
                g, ll, e = _full_pass_score(y, model, theta, epsilon, n_particles, rng, score_method, use_psi)
            else:
                g, ll, e = score_fn(theta)
            theta, n_clip = _update(dom, schedule, j, theta, scale * np.asarray(g, dtype=float))
        except DegeneracyError as exc:
            exc.record = rec.truncate(j - 1)
            raise
        rec.theta[j - 1], rec.grad[j - 1] = theta, g
        rec.ess[j - 1], rec.loglik[j - 1], rec.clipped[j - 1] = e, ll, n_clip
        if record_time:
            rec.wall[j - 1] = time.perf_counter() - t_start
        if callback is not None:
            callback(j, theta)
    return rec


def online_gradient_ascent(
    y,
    model,
    theta0,
    epsilon,
    n_particles,
    schedule=None,
    rng=None,
    use_psi=None,
    score_method="ON2",
    record_time=False,
    thin=1,
) -> RunRecord:
    """One update per observation using the incremental score.

    For hidden-dynamics models a single particle system runs along the
    theta trajectory; the incremental score is the difference of consecutive
    total-score estimates. Models without dynamics use the per-observation
    importance-sampling score. ``thin`` keeps every ``thin``-th row.
    """
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    if n == 0:
        raise ConfigError("empty data stream")
    if thin < 1:
        raise ConfigError("thin must be >= 1")
    if score_method not in ("ON", "ON2"):
        raise ConfigError(f"unknown score method {score_method!r}")
    rng = np.random.default_rng() if rng is None else rng
    theta, dom, schedule = _prepare(model, theta0, schedule)
    rows = (n + thin - 1) // thin
    rec = RunRecord.empty(model.param_names, theta, rows, record_time,
                          {"driver": "online", "score_method": score_method, "thin": thin,
                           "schedule": schedule.as_dict()})
    hmm = model.d_x > 0
    if hmm:
        ps = smc.pf_init(model, theta, n_particles, rng, score_method)
        prev_total = np.zeros(model.d_theta)
    for t in range(n):
        t_start = time.perf_counter() if record_time else 0.0
        try:
            if hmm:
                ps = smc.pf_step(ps, y[t], model, theta, epsilon, rng, score_method, use_psi)
                g = ps.score_estimate - prev_total
                prev_total = ps.score_estimate
                ll, e = ps.last_increment, ps.ess
            else:
                s, l1, e1 = iid_scores(y[t:t + 1], model, theta, epsilon, n_particles, rng, use_psi)
                g, ll, e = s[0], float(l1[0]), float(e1[0])
            theta, n_clip = _update(dom, schedule, t + 1, theta, g)
        except DegeneracyError as exc:
            exc.record = rec.truncate(t // thin)
            raise
        if (t + 1) % thin == 0 or t == n - 1:
            r = t // thin
            rec.theta[r], rec.grad[r], rec.ess[r], rec.loglik[r] = theta, g, e, ll
            rec.clipped[r] += n_clip
            if record_time:
                rec.wall[r] = time.perf_counter() - t_start
        else:
            rec.clipped[t // thin] += n_clip
    return rec


def finite_difference_score(y, model, theta, epsilon, n_particles, delta, seed, use_psi=None) -> np.ndarray:
    """Central differences of the log-likelihood estimate with common random numbers."""
    if not delta > 0:
        raise ConfigError(f"delta must be positive, got {delta!r}")
    theta = model.check(theta)
    g = np.empty(theta.size)
    for i in range(theta.size):
        tp, tm = theta.copy(), theta.copy()
        tp[i] += delta
        tm[i] -= delta
        lp = smc.estimate_log_likelihood(y, model, tp, epsilon, n_particles, np.random.default_rng(seed), use_psi)
        lm = smc.estimate_log_likelihood(y, model, tm, epsilon, n_particles, np.random.default_rng(seed), use_psi)
        g[i] = (lp - lm) / (2.0 * delta)
    return g
