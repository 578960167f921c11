"""Analytic-versus-finite-difference checks for every model gradient.

Derivatives are compared against a Richardson-extrapolated central
difference, which has O(h^4) truncation error, so a modest step keeps
roundoff small. Agreement is judged with a relative tolerance plus an
absolute floor proportional to the function's magnitude (the unavoidable
roundoff scale of any difference quotient).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# parameter boxes the random points are drawn from, per model
BOXES = {
    "alpha_stable": [(1.1, 1.9), (-0.9, 0.9), (-2.0, 2.0), (0.2, 2.0)],
    "alpha_stable_low": [(0.3, 0.9), (-0.9, 0.9), (-2.0, 2.0), (0.2, 2.0)],
    "g_and_k": [(-3.0, 3.0), (0.0, 1.0), (-5.0, 15.0), (0.5, 3.0)],
    "sv_alpha_r": [(1.1, 1.95), (-0.95, 0.95), (0.01, 1.0), (-0.5, 0.5)],
    "gaussian_surrogate": [(-0.95, 0.95), (0.05, 2.0), (0.1, 2.0)],
}

RTOL = 1e-5
FLOOR = 1e-8


def richardson_derivative(f, theta, i, h):
    """d f / d theta_i by two-level Richardson extrapolation of central differences."""

    def central(step):
        tp, tm = theta.copy(), theta.copy()
        tp[i] += step
        tm[i] -= step
        return (f(tp) - f(tm)) / (2.0 * step)

    return (4.0 * central(0.5 * h) - central(h)) / 3.0


def fd_gradient(f, theta, rel_step=1e-3):
    """Columns of d f / d theta for a vector-valued ``f``; shape f(theta).shape + (d,)."""
    theta = np.asarray(theta, dtype=float)
    cols = [richardson_derivative(f, theta, i, rel_step * max(abs(theta[i]), 1e-2)) for i in range(theta.size)]
    return np.stack(cols, axis=-1)


@dataclass
class CheckResult:
    name: str
    n_points: int
    max_rel_error: float
    n_failures: int
    max_tol_ratio: float = 0.0  # worst error divided by its allowed tolerance; <= 1 passes

    @property
    def ok(self) -> bool:
        return self.n_failures == 0

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        return f"{status} {self.name}: {self.n_points} points, max rel err {self.max_rel_error:.2e}, worst err/tol {self.max_tol_ratio:.1e}, failures {self.n_failures}"


def compare(name, analytic, numeric, values, rtol=RTOL, floor=FLOOR) -> CheckResult:
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.asarray(numeric, dtype=float)
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    mag = np.maximum(1.0, np.abs(np.asarray(values, dtype=float)))[..., None]
    err = np.abs(analytic - numeric)
    tol = rtol * scale + floor * mag
    bad = ~(err <= tol)
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.where(scale > 0, err / scale, 0.0)
    n_pts = analytic.shape[0]
    worst = float(np.nanmax(err / tol)) if err.size else 0.0
    return CheckResult(name, n_pts, float(np.nanmax(rel)) if rel.size else 0.0, int(bad.any(axis=-1).sum()), worst)


def _sample_theta(box, n, rng):
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    return lo + (hi - lo) * rng.random((n, len(box)))


def check_model(model, n_points=1000, seed=0, box=None, rtol=RTOL, floor=FLOOR) -> list[CheckResult]:
    """Check grad tau, grad log aux and (for hidden chains) grad log initial/transition."""
    rng = np.random.default_rng(seed)
    if box is None:
        box = BOXES[model.name][: model.d_theta]
    thetas = _sample_theta(box, n_points, rng)
    tau_a, tau_n, tau_v = [], [], []
    aux_a, aux_n, aux_v = [], [], []
    ini_a, ini_n, ini_v = [], [], []
    tr_a, tr_n, tr_v = [], [], []
    for th in thetas:
        x = model.sample_initial(th, 1, rng) if model.d_x else np.empty((1, 0))
        u = model.sample_aux(th, x, rng)
        _, g = model.tau_and_grad(th, x, u)
        tau_a.append(g[0])
        tau_n.append(fd_gradient(lambda t: model.tau(t, x, u), th)[0])
        tau_v.append(model.tau(th, x, u)[0])
        aux_a.append(model.grad_log_aux(th, x, u)[0])
        aux_n.append(fd_gradient(lambda t: model.log_aux(t, x, u), th)[0])
        aux_v.append(model.log_aux(th, x, u)[0])
        if model.d_x:
            ini_a.append(model.grad_log_initial(th, x)[0])
            ini_n.append(fd_gradient(lambda t: model.log_initial(t, x), th)[0])
            ini_v.append(model.log_initial(th, x)[0])
            xn = model.sample_transition(th, x, rng)
            tr_a.append(model.grad_log_transition(th, x, xn)[0])
            tr_n.append(fd_gradient(lambda t: model.log_transition(t, x, xn), th)[0])
            tr_v.append(model.log_transition(th, x, xn)[0])
    out = [
        compare(f"{model.name} grad tau", tau_a, tau_n, tau_v, rtol, floor),
        compare(f"{model.name} grad log aux", aux_a, aux_n, aux_v, rtol, floor),
    ]
    if model.d_x:
        out.append(compare(f"{model.name} grad log initial", ini_a, ini_n, ini_v, rtol, floor))
        out.append(compare(f"{model.name} grad log transition", tr_a, tr_n, tr_v, rtol, floor))
    return out
