import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from noisyabc import smc
from noisyabc.core import corrupt_observations
from noisyabc.errors import ConfigError, DegeneracyError
from noisyabc.iid import iid_scores
from noisyabc.models import GandKModel, GaussianSurrogateModel, HMMModel, kalman_log_likelihood, kalman_score
from noisyabc.params import REAL, Domain

SURR = GaussianSurrogateModel()
THETA = np.array([0.8, 0.5, 0.7])


class ConstantModel(HMMModel):
    """tau = theta[0] for every particle."""

    name = "constant"
    d_x = 0
    d_u = 1
    uses_psi = False

    @property
    def domain(self):
        return Domain(("c",), (REAL,))

    def sample_aux(self, theta, x, rng):
        return rng.random((x.shape[0], 1))

    def log_aux(self, theta, x, u):
        return np.zeros(u.shape[0])

    def tau_and_grad(self, theta, x, u):
        return np.full(u.shape[0], theta[0]), np.ones((u.shape[0], 1))


def surrogate_data(n, eps, seed=5):
    raw = SURR.simulate(THETA, n, np.random.default_rng(seed))
    return corrupt_observations(raw, eps, False, seed + 1).values


# -- resampling and ESS --------------------------------------------------------
def test_ess_values():
    assert smc.ess(np.full(10, 0.1)) == pytest.approx(10)
    assert smc.ess(np.r_[1.0, np.zeros(9)]) == 1.0
    assert smc.ess(np.r_[0.5, 0.5, np.zeros(3)]) == pytest.approx(2.0)
    assert smc.ess_from_log(np.log(np.full(4, 0.25))) == pytest.approx(4.0)


def test_systematic_degenerate_and_uniform(rng):
    w = np.zeros(8)
    w[3] = 1.0
    assert np.all(smc.systematic_resample(w, rng) == 3)
    assert np.array_equal(smc.systematic_resample(np.full(8, 1 / 8), rng), np.arange(8))


@given(arrays(np.float64, st.integers(2, 60), elements=st.floats(0, 1)), st.integers(0, 2**32 - 1))
def test_systematic_offspring_within_one(raw, seed):
    if raw.sum() <= 0:
        raw = raw + 1.0
    w = raw / raw.sum()
    anc = smc.systematic_resample(w, np.random.default_rng(seed))
    counts = np.bincount(anc, minlength=w.size)
    assert np.all(np.abs(counts - w.size * w) < 1 + 1e-9)
    assert np.all(np.diff(anc) >= 0)


# -- filter mechanics --------------------------------------------------------------
def test_init_state(rng):
    ps = smc.pf_init(SURR, THETA, 50, rng, "ON")
    assert np.allclose(np.exp(ps.log_weights), 1 / 50)
    assert np.all(ps.scores == 0) and ps.log_likelihood == 0.0
    with pytest.raises(ConfigError):
        smc.pf_init(SURR, THETA, 1, rng)


def test_equal_tau_gives_uniform_weights(rng):
    m = ConstantModel()
    ps = smc.pf_step(smc.pf_init(m, [0.3], 40, rng), 1.0, m, [0.3], 0.5, rng)
    assert np.allclose(np.exp(ps.last_log_weights), 1 / 40)
    assert ps.ess == pytest.approx(40)


def test_weights_normalised_and_likelihood_accumulates(rng):
    y = surrogate_data(20, 0.3)
    ps = smc.pf_init(SURR, THETA, 300, rng)
    total = 0.0
    for t in range(20):
        ps = smc.pf_step(ps, y[t], SURR, THETA, 0.3, rng)
        total += ps.last_increment
        assert abs(np.exp(ps.last_log_weights).sum() - 1.0) < 1e-12
    assert ps.log_likelihood == total


def test_empty_series_gives_zero(rng):
    assert smc.estimate_log_likelihood([], SURR, THETA, 0.1, 100, rng) == 0.0


def test_degeneracy_error(rng):
    with pytest.raises(DegeneracyError) as info:
        smc.estimate_log_likelihood([1e200], SURR, THETA, 1e-200, 50, rng)
    assert info.value.step == 1


def test_adaptive_resampling_only_for_path_method(rng):
    ps = smc.pf_init(SURR, THETA, 20, rng, "ON2")
    with pytest.raises(ConfigError):
        smc.pf_step(ps, 0.0, SURR, THETA, 0.5, rng, "ON2", resample_threshold=0.5)
    res = smc.run_filter(surrogate_data(10, 0.5), SURR, THETA, 0.5, 200, rng, "ON", resample_threshold=0.5)
    assert np.isfinite(res.log_likelihood)


def test_determinism():
    y = surrogate_data(15, 0.3)
    a = smc.run_filter(y, SURR, THETA, 0.3, 100, np.random.default_rng(9), "ON2")
    b = smc.run_filter(y, SURR, THETA, 0.3, 100, np.random.default_rng(9), "ON2")
    assert np.array_equal(a.scores, b.scores) and np.array_equal(a.increments, b.increments)


# -- unbiasedness and Kalman agreement -------------------------------------------------
def test_single_step_likelihood_unbiased():
    y = surrogate_data(1, 0.3)
    exact = np.exp(kalman_log_likelihood(y, THETA, 0.3))
    est = np.exp([smc.estimate_log_likelihood(y, SURR, THETA, 0.3, 50, np.random.default_rng(s))
                  for s in range(10_000)])
    assert abs(est.mean() - exact) < 3 * est.std(ddof=1) / np.sqrt(est.size)


def test_large_n_likelihood_close_to_kalman():
    y = surrogate_data(50, 0.5)
    exact = kalman_log_likelihood(y, THETA, 0.5)
    lls = np.array([smc.estimate_log_likelihood(y, SURR, THETA, 0.5, 20_000, np.random.default_rng(s))
                    for s in range(100)])
    assert abs(lls[0] - exact) < 0.5
    ratio = np.exp(lls - exact)
    assert abs(ratio.mean() - 1.0) < 3 * ratio.std(ddof=1) / 10


def test_more_particles_lower_variance():
    y = surrogate_data(30, 0.3)
    var = [np.var([smc.estimate_log_likelihood(y, SURR, THETA, 0.3, n, np.random.default_rng(s))
                   for s in range(100)]) for n in (100, 200)]
    assert var[1] < var[0]


@pytest.mark.parametrize("method", ["ON", "ON2"])
def test_score_matches_kalman(method):
    y = surrogate_data(20, 0.5)
    exact = kalman_score(y, THETA, 0.5)
    S = np.array([smc.estimate_score(y, SURR, THETA, 0.5, 500, np.random.default_rng(s), method).total_score
                  for s in range(60)])
    se = S.std(axis=0, ddof=1) / np.sqrt(len(S))
    assert np.all(np.abs(S.mean(axis=0) - exact) < 3 * se)


# -- score recursions ------------------------------------------------------------
def test_first_step_methods_coincide():
    y = surrogate_data(1, 0.3)
    a = smc.run_filter(y, SURR, THETA, 0.3, 100, np.random.default_rng(1), "ON").scores[0]
    b = smc.run_filter(y, SURR, THETA, 0.3, 100, np.random.default_rng(1), "ON2").scores[0]
    assert np.array_equal(a, b)


def test_iid_mixture_collapses(rng):
    m = GandKModel()
    theta = np.array([0.5, 0.2, 0.0, 1.0])
    lw = rng.standard_normal(30)
    lw -= np.log(np.exp(lw).sum())
    acc = rng.standard_normal((30, 4))
    x = np.empty((30, 0))
    fast, _ = m.mixture_transition_score(theta, x, lw, acc, x, collapse=True)
    slow, _ = m.mixture_transition_score(theta, x, lw, acc, x, collapse=False)
    assert np.allclose(fast, slow, rtol=1e-12, atol=1e-14)


def test_iid_filter_agrees_with_importance_sampling():
    m = GandKModel()
    theta = np.array([2.0, 0.5, 0.0, 2.0])
    y = np.array([0.4])
    pf = np.array([smc.estimate_score(y, m, theta, 0.1, 200, np.random.default_rng(s), "ON").total_score
                   for s in range(2000)])
    iid, _, _ = iid_scores(np.repeat(y, 2000), m, theta, 0.1, 200, np.random.default_rng(1))
    diff = pf.mean(axis=0) - iid.mean(axis=0)
    se = np.sqrt(pf.var(axis=0) / 2000 + iid.var(axis=0) / 2000)
    assert np.all(np.abs(diff) < 3.5 * se)


def test_score_on2_permutation_invariant(rng):
    n = 40
    x_prev = rng.standard_normal((n, 1))
    lw = rng.standard_normal(n)
    lw -= np.log(np.exp(lw).sum())
    acc = rng.standard_normal((n, 3))
    x = rng.standard_normal((n, 1))
    u = rng.standard_normal((n, 1))
    base = smc.score_ON2_update(SURR, THETA, x_prev, lw, acc, x, u, 0.2, 0.3)
    p = rng.permutation(n)
    perm = smc.score_ON2_update(SURR, THETA, x_prev[p], lw[p], acc[p], x, u, 0.2, 0.3)
    assert np.allclose(base, perm, rtol=1e-10, atol=1e-12)
    on = smc.score_ON_update(SURR, THETA, acc, x_prev, x, u, 0.2, 0.3)
    assert np.allclose(on[p], smc.score_ON_update(SURR, THETA, acc[p], x_prev[p], x[p], u[p], 0.2, 0.3))


@pytest.mark.slow
def test_incremental_score_variance_growth():
    y = surrogate_data(500, 0.5)

    def inc_var(method, t):
        S = np.array([smc.run_filter(y, SURR, THETA, 0.5, 200, np.random.default_rng(s), method).scores
                      for s in range(50)])
        inc = np.diff(S, axis=1)
        return inc[:, 89:99].var(axis=0, ddof=1).mean(axis=0), inc[:, -10:].var(axis=0, ddof=1).mean(axis=0)

    on_early, on_late = inc_var("ON", 0)
    on2_early, on2_late = inc_var("ON2", 0)
    assert np.all(on_late > on_early)
    assert np.all(on_late > 5 * on2_late)
    assert np.all(on2_late / on2_early < 3.0)


@pytest.mark.slow
def test_score_on2_bias_shrinks_with_particles():
    # small eps -> low ESS -> visible ratio bias in the phi score, roughly 1/N
    y = surrogate_data(10, 0.1, seed=30)
    exact = kalman_score(y, THETA, 0.1)
    bias, se = {}, {}
    for n_part, reps in ((250, 800), (1000, 400)):
        S = np.array([smc.estimate_score(y, SURR, THETA, 0.1, n_part, np.random.default_rng([5, r]), "ON2").total_score
                      for r in range(reps)])
        bias[n_part] = S.mean(axis=0)[0] - exact[0]
        se[n_part] = S[:, 0].std(ddof=1) / np.sqrt(reps)
    assert bias[250] < -3 * se[250]
    assert abs(bias[1000]) < 0.5 * abs(bias[250])


# -- conditional CDF ---------------------------------------------------------------
def _fixed_system(centers, logw):
    ps = smc.pf_init(SURR, THETA, len(centers), np.random.default_rng(0))
    ps.last_centers = np.asarray(centers, dtype=float)
    ps.last_pred_log_weights = np.asarray(logw, dtype=float)
    ps.last_log_weights = np.asarray(logw, dtype=float)
    return ps


def test_conditional_cdf_limits_and_monotone():
    ps = _fixed_system([0.3, 0.3], np.log([0.5, 0.5]))
    assert smc.conditional_cdf(ps, 0.3, 0.1) == pytest.approx(0.5)
    assert smc.conditional_cdf(ps, 1e6, 0.1) == 1.0
    ps = _fixed_system([-1.0, 0.2, 2.0], np.log([0.2, 0.5, 0.3]))
    vals = [smc.conditional_cdf(ps, v, 0.3) for v in np.linspace(-4, 4, 200)]
    assert np.all(np.diff(vals) >= 0) and 0 <= min(vals) and max(vals) <= 1
    with pytest.raises(ConfigError):
        smc.conditional_cdf(ps, 0.0, 0.3, weighting="bogus")
