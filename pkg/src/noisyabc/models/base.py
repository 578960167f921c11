"""The model contract consumed by the SMC engine and the estimators.

All methods are vectorised over a leading particle axis and take the natural
(constrained) parameter vector ``theta`` as a 1-D array. Gradients are always
with respect to those natural coordinates; the drivers apply the chain rule
to the unconstrained chart.
"""

from __future__ import annotations

import numpy as np

from ..errors import DomainError
from ..params import Domain


class HMMModel:
    """Extended HMM with latent z = (x, u), observation psi(tau(theta, x, u)) + noise.

    Subclasses fill in the samplers, log-densities and gradients. Shapes:
    ``x`` is (n, d_x), ``u`` is (n, d_u), ``tau`` returns (n,) and every
    gradient returns (n, d_theta). ``log_transition``/``grad_log_transition``
    broadcast over any leading axes of ``x`` and ``x_new``.
    """

    name = "abstract"
    d_x = 0
    d_u = 1
    uses_psi = True
    # True when nu_theta(u | x) carries theta; lets callers pre-draw aux blocks
    aux_depends_on_theta = False
    # name of a pure shift parameter, if any (used for pre-centering)
    location_param = None

    @property
    def param_names(self) -> tuple:
        return self.domain.names

    @property
    def d_theta(self) -> int:
        return self.domain.dim

    @property
    def domain(self) -> Domain:
        raise NotImplementedError

    def optimization_domain(self, theta0) -> Domain:
        """Domain used by gradient ascent started at ``theta0``."""
        return self.domain

    def check(self, theta) -> np.ndarray:
        return self.domain.check(theta)

    # hidden chain ---------------------------------------------------------
    def sample_initial(self, theta, n, rng) -> np.ndarray:
        return np.empty((n, self.d_x))

    def log_initial(self, theta, x) -> np.ndarray:
        return np.zeros(x.shape[0])

    def grad_log_initial(self, theta, x) -> np.ndarray:
        return np.zeros((x.shape[0], self.d_theta))

    def sample_transition(self, theta, x, rng) -> np.ndarray:
        return np.empty((x.shape[0], self.d_x))

    def log_transition(self, theta, x, x_new) -> np.ndarray:
        shape = np.broadcast_shapes(x.shape[:-1], x_new.shape[:-1])
        return np.zeros(shape)

    def grad_log_transition(self, theta, x, x_new) -> np.ndarray:
        shape = np.broadcast_shapes(x.shape[:-1], x_new.shape[:-1])
        return np.zeros(shape + (self.d_theta,))

    # auxiliary variables ---------------------------------------------------
    def sample_aux(self, theta, x, rng) -> np.ndarray:
        raise NotImplementedError

    def log_aux(self, theta, x, u) -> np.ndarray:
        raise NotImplementedError

    def grad_log_aux(self, theta, x, u) -> np.ndarray:
        return np.zeros((u.shape[0], self.d_theta))

    def check_aux(self, u) -> None:
        pass

    # observation map -------------------------------------------------------
    def tau(self, theta, x, u) -> np.ndarray:
        return self.tau_and_grad(theta, x, u)[0]

    def grad_tau(self, theta, x, u) -> np.ndarray:
        return self.tau_and_grad(theta, x, u)[1]

    def tau_and_grad(self, theta, x, u):
        raise NotImplementedError

    # O(N^2) score recursion --------------------------------------------------
    def mixture_transition_score(self, theta, x_prev, logw_prev, acc_prev, x_new, collapse=True):
        """f-weighted mixture over previous particles of (acc + grad log f).

        Returns ``(mix, log_denom)`` with ``mix`` of shape (n_new, d_theta) and
        ``log_denom[i] = log sum_j W_j f(x_new[i] | x_prev[j])``. With
        ``collapse`` and no hidden dynamics the mixture weights do not depend
        on i, so the O(N^2) sum reduces to the O(N) weighted mean.
        """
        n_new = x_new.shape[0]
        if collapse and self.d_x == 0:
            W = np.exp(logw_prev)
            mean = W @ acc_prev
            return np.broadcast_to(mean, (n_new, acc_prev.shape[1])).copy(), np.zeros(n_new)
        lf = self.log_transition(theta, x_prev[None, :, :], x_new[:, None, :])
        gf = self.grad_log_transition(theta, x_prev[None, :, :], x_new[:, None, :])
        lw = logw_prev[None, :] + lf
        mx = lw.max(axis=1)
        e = np.exp(lw - mx[:, None])
        s = e.sum(axis=1)
        P = e / s[:, None]
        mix = P @ acc_prev + np.einsum("ij,ijd->id", P, gf)
        return mix, mx + np.log(s)

    # i.i.d. helpers ------------------------------------------------------------
    def iid_scores(self, theta, y, n_samples, rng, epsilon, use_psi=None):
        """Self-normalised IS scores for every entry of ``y`` (d_x == 0 only).

        Generic numpy path; built-in models override with fused kernels.
        Returns ``(scores (m, d), loglik (m,), ess (m,))``.
        """
        from ..kernels import numpy_backend

        if self.d_x != 0:
            raise DomainError(f"{self.name} has hidden dynamics; use the particle filter")
        use_psi = self.uses_psi if use_psi is None else use_psi
        y = np.atleast_1d(np.asarray(y, dtype=float))
        m = y.shape[0]
        x = np.empty((m * n_samples, 0))
        u = self.sample_aux(theta, x, rng)
        tau, gtau = self.tau_and_grad(theta, x, u)
        gaux = self.grad_log_aux(theta, x, u)
        scores, loglik, ess = numpy_backend._snis_combine(
            y, tau.reshape(m, n_samples), gtau.reshape(m, n_samples, -1), epsilon, use_psi
        )
        if np.any(gaux):
            # weights are recomputed here so the aux term uses the same W
            W = _snis_weights(y, tau.reshape(m, n_samples), epsilon, use_psi)
            scores = scores + np.einsum("mn,mnd->md", W, gaux.reshape(m, n_samples, -1))
        return scores, loglik, ess

    # simulation ----------------------------------------------------------------
    def simulate_states(self, theta, n, rng) -> np.ndarray:
        if self.d_x == 0:
            return np.empty((n, 0))
        xs = np.empty((n, self.d_x))
        x = self.sample_initial(theta, 1, rng)
        xs[0] = x[0]
        for t in range(1, n):
            x = self.sample_transition(theta, x, rng)
            xs[t] = x[0]
        return xs

    def simulate(self, theta, n, rng, return_states=False):
        """Draw ``n`` raw (un-noised, untransformed) observations from the model."""
        theta = self.check(theta)
        xs = self.simulate_states(theta, n, rng)
        u = self.sample_aux(theta, xs, rng)
        y = self.tau(theta, xs, u)
        if return_states:
            return y, xs, u
        return y


def _snis_weights(y, tau, epsilon, use_psi):
    center = np.arctan(tau) if use_psi else tau
    lw = -0.5 * ((y[:, None] - center) / epsilon) ** 2
    lw -= lw.max(axis=1, keepdims=True)
    W = np.exp(lw)
    return W / W.sum(axis=1, keepdims=True)


class AR1Dynamics:
    """Gaussian AR(1) hidden chain x' = phi x + delta + N(0, sigma2) with stationary start.

    Mixed into models whose parameter vector carries ``phi``, ``sigma2`` and
    optionally ``delta``.
    """

    def _ar1(self, theta):
        names = self.param_names
        phi = theta[names.index("phi")]
        s2 = theta[names.index("sigma2")]
        delta = theta[names.index("delta")] if "delta" in names else 0.0
        return phi, s2, delta

    def _ar1_slots(self):
        names = self.param_names
        return (
            names.index("phi"),
            names.index("sigma2"),
            names.index("delta") if "delta" in names else -1,
        )

    def stationary_moments(self, theta):
        phi, s2, delta = self._ar1(theta)
        return delta / (1.0 - phi), s2 / (1.0 - phi * phi)

    def sample_initial(self, theta, n, rng):
        m, v = self.stationary_moments(theta)
        return (m + np.sqrt(v) * rng.standard_normal(n))[:, None]

    def log_initial(self, theta, x):
        m, v = self.stationary_moments(theta)
        r = x[..., 0] - m
        return -0.5 * np.log(2.0 * np.pi * v) - 0.5 * r * r / v

    def grad_log_initial(self, theta, x):
        phi, s2, delta = self._ar1(theta)
        m, v = self.stationary_moments(theta)
        r = x[..., 0] - m
        d_m = r / v
        d_v = -0.5 / v + 0.5 * r * r / (v * v)
        i_phi, i_s2, i_delta = self._ar1_slots()
        g = np.zeros(x.shape[:-1] + (self.d_theta,))
        g[..., i_phi] = d_m * delta / (1.0 - phi) ** 2 + d_v * s2 * 2.0 * phi / (1.0 - phi * phi) ** 2
        g[..., i_s2] = d_v / (1.0 - phi * phi)
        if i_delta >= 0:
            g[..., i_delta] = d_m / (1.0 - phi)
        return g

    def sample_transition(self, theta, x, rng):
        phi, s2, delta = self._ar1(theta)
        return phi * x + delta + np.sqrt(s2) * rng.standard_normal(x.shape)

    def log_transition(self, theta, x, x_new):
        phi, s2, delta = self._ar1(theta)
        r = x_new[..., 0] - phi * x[..., 0] - delta
        return -0.5 * np.log(2.0 * np.pi * s2) - 0.5 * r * r / s2

    def grad_log_transition(self, theta, x, x_new):
        phi, s2, delta = self._ar1(theta)
        r = x_new[..., 0] - phi * x[..., 0] - delta
        i_phi, i_s2, i_delta = self._ar1_slots()
        shape = np.broadcast_shapes(x.shape[:-1], x_new.shape[:-1])
        g = np.zeros(shape + (self.d_theta,))
        g[..., i_phi] = r * x[..., 0] / s2
        g[..., i_s2] = -0.5 / s2 + 0.5 * r * r / (s2 * s2)
        if i_delta >= 0:
            g[..., i_delta] = r / s2
        return g

    def mixture_transition_score(self, theta, x_prev, logw_prev, acc_prev, x_new, collapse=True):
        from .. import kernels

        phi, s2, delta = self._ar1(theta)
        i_phi, i_s2, i_delta = self._ar1_slots()
        return kernels.ar1_mixture(
            x_prev[:, 0], logw_prev, acc_prev, x_new[:, 0], phi, s2, delta, i_phi, i_s2, i_delta
        )
