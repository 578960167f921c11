import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from noisyabc.core import (
    ExtendedState,
    corrupt_observations,
    grad_log_h_eps,
    log_h_eps,
    psi_transform,
)
from noisyabc.errors import ConfigError, EvaluationError
from noisyabc.gradcheck import fd_gradient
from noisyabc.models import AlphaStableModel, GandKModel, GaussianSurrogateModel, SVAlphaRModel

HALF_LOG_2PI = 0.5 * math.log(2 * math.pi)


def test_psi_values():
    assert psi_transform(0.0) == 0.0
    assert psi_transform(1.0) == pytest.approx(math.pi / 4, abs=1e-15)
    assert psi_transform(1e3) == pytest.approx(1.5697963271282298, abs=1e-12)


@given(st.floats(-1e6, 1e6), st.floats(1e-6, 10.0))
def test_psi_odd_and_increasing(y, d):
    assert psi_transform(-y) == -psi_transform(y)
    assert psi_transform(y + d) >= psi_transform(y)


def test_corrupt_is_deterministic_and_validated():
    raw = np.array([0.0, 1.0, -2.0])
    a = corrupt_observations(raw, 0.1, True, 7)
    b = corrupt_observations(raw, 0.1, True, 7)
    assert np.array_equal(a.values, b.values)
    assert len(a) == 3
    with pytest.raises(ConfigError):
        corrupt_observations(raw, 0.0, True, 7)
    with pytest.raises(ConfigError):
        corrupt_observations([], 0.1, True, 7)


def test_corrupt_small_epsilon_limit():
    raw = np.array([0.5, -3.0])
    out = corrupt_observations(raw, 1e-300, True, 1).values
    assert np.array_equal(out, np.arctan(raw))


def test_corrupt_noise_has_unit_variance():
    out = corrupt_observations(np.zeros(100_000), 1.0, False, 3).values
    assert out.var() == pytest.approx(1.0, rel=0.02)


def _surrogate_state(x, u):
    return ExtendedState(np.array([[x]]), np.array([[u]]))


def test_log_h_eps_reference_values():
    m = GaussianSurrogateModel()
    theta = [0.5, 1.0, 0.5]
    z = _surrogate_state(0.3, 0.4)
    tau = 0.3 + 0.5 * 0.4
    eps = 0.2
    assert log_h_eps(tau, z, theta, eps, m)[0] == pytest.approx(-math.log(eps) - HALF_LOG_2PI)
    assert log_h_eps(tau + eps, z, theta, eps, m)[0] == pytest.approx(-math.log(eps) - HALF_LOG_2PI - 0.5)


def test_log_h_eps_integrates_to_one():
    m = AlphaStableModel()
    z = ExtendedState(np.empty((1, 0)), np.array([[0.2, 1.3]]))
    theta = [1.5, 0.2, 0.0, 0.5]
    grid = np.linspace(-3, 3, 200_001)
    dens = np.exp(log_h_eps(grid[:, None], z, theta, 0.1, m)[:, 0])
    assert np.trapezoid(dens, grid) == pytest.approx(1.0, abs=1e-6)


def test_residual_symmetry():
    m = GaussianSurrogateModel()
    theta = [0.5, 1.0, 1.0]
    a = log_h_eps(1.0, _surrogate_state(0.2, 0.3), theta, 0.1, m)
    b = log_h_eps(2.5, _surrogate_state(1.7, 0.3), theta, 0.1, m)
    assert a[0] == pytest.approx(b[0], abs=1e-12)


def test_grad_zero_at_mode_and_linear_case():
    m = GaussianSurrogateModel()
    theta = [0.5, 1.0, 0.7]
    z = _surrogate_state(0.3, 0.4)
    tau = 0.3 + 0.7 * 0.4
    assert np.all(grad_log_h_eps(tau, z, theta, 0.1, m) == 0.0)
    # tau is linear in sigma_y with slope u
    y = 1.0
    g = grad_log_h_eps(y, z, theta, 0.1, m)[0]
    assert g[2] == pytest.approx((y - tau) / 0.01 * 0.4)
    z1 = _surrogate_state(0.3, 1.0)
    assert grad_log_h_eps(y, z1, theta, 0.1, m)[0][2] == pytest.approx((y - (0.3 + 0.7)) / 0.01)


def test_non_finite_tau_raises():
    m = AlphaStableModel()
    z = ExtendedState(np.empty((1, 0)), np.array([[0.2, 1.0]]))
    with pytest.raises(EvaluationError):
        log_h_eps(0.0, z, [1.5, 0.0, np.inf, 1.0], 0.1, m)


@pytest.mark.parametrize(
    "model,box",
    [
        (AlphaStableModel(), [(1.1, 1.9), (-0.9, 0.9), (-2, 2), (0.2, 2)]),
        (GandKModel(), [(-2, 2), (0, 1), (-2, 2), (0.5, 3)]),
        (SVAlphaRModel(drift=True), [(1.1, 1.9), (-0.9, 0.9), (0.05, 1), (-0.5, 0.5)]),
        (GaussianSurrogateModel(), [(-0.9, 0.9), (0.1, 2), (0.1, 2)]),
    ],
    ids=lambda v: getattr(v, "name", ""),
)
def test_grad_log_h_eps_matches_finite_differences(model, box, rng):
    lo, hi = np.array(box).T
    for _ in range(200):
        theta = lo + (hi - lo) * rng.random(len(box))
        x = model.sample_initial(theta, 1, rng) if model.d_x else np.empty((1, 0))
        z = ExtendedState(x, model.sample_aux(theta, x, rng))
        center = model.tau(theta, z.x, z.u)[0]
        center = np.arctan(center) if model.uses_psi else center
        y = center + 0.1 * rng.standard_normal()
        an = grad_log_h_eps(y, z, theta, 0.1, model)[0]
        fd = fd_gradient(lambda t: log_h_eps(y, z, t, 0.1, model), theta)[0]
        val = abs(log_h_eps(y, z, theta, 0.1, model)[0])
        assert np.all(np.abs(an - fd) <= 1e-5 * np.maximum(np.abs(an), np.abs(fd)) + 1e-8 * max(1.0, val))
