"""Constrained parameter vectors and their unconstrained reparameterisation.

Each coordinate carries an :class:`Interval`. Finite intervals use a scaled
logit, half-lines a shifted log, the real line the identity. Gradient ascent
runs on the unconstrained side, so iterates can never leave the domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

# closed endpoints sit on the edge of the logit/log chart; they are nudged
# inward by this relative amount before mapping
_CLOSED_NUDGE = 1e-12
_MAX_LOG = 709.0


@dataclass(frozen=True)
class Interval:
    lo: float = -math.inf
    hi: float = math.inf
    lo_closed: bool = False
    hi_closed: bool = False

    @property
    def kind(self) -> str:
        if math.isfinite(self.lo) and math.isfinite(self.hi):
            return "logit"
        if math.isfinite(self.lo):
            return "log_lower"
        if math.isfinite(self.hi):
            return "log_upper"
        return "identity"

    def contains(self, v: float) -> bool:
        if not math.isfinite(v):
            return False
        above = v >= self.lo if self.lo_closed else v > self.lo
        below = v <= self.hi if self.hi_closed else v < self.hi
        return above and below

    def __str__(self) -> str:
        left = "[" if self.lo_closed else "("
        right = "]" if self.hi_closed else ")"
        return f"{left}{self.lo}, {self.hi}{right}"


REAL = Interval()


def positive(closed: bool = False) -> Interval:
    return Interval(0.0, math.inf, lo_closed=closed)


@dataclass(frozen=True)
class Domain:
    """Named per-coordinate constraint descriptor."""

    names: tuple
    intervals: tuple

    def __post_init__(self):
        if len(self.names) != len(self.intervals):
            raise ValueError("names and intervals must have equal length")

    @property
    def dim(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def replace(self, name: str, interval: Interval) -> "Domain":
        ivs = list(self.intervals)
        ivs[self.index(name)] = interval
        return Domain(self.names, tuple(ivs))

    def check(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.shape != (self.dim,):
            raise DomainError(f"expected {self.dim} parameters {self.names}, got shape {values.shape}")
        for name, iv, v in zip(self.names, self.intervals, values):
            if not iv.contains(float(v)):
                raise DomainError(f"parameter {name}={v!r} outside {iv}")
        return values

    def to_unconstrained(self, values) -> np.ndarray:
        values = self.check(values)
        out = np.empty(self.dim)
        for i, (iv, v) in enumerate(zip(self.intervals, values)):
            out[i] = _forward(iv, float(v), self.names[i])
        return out

    def from_unconstrained(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.dim,) or not np.all(np.isfinite(v)):
            raise DomainError(f"unconstrained vector must be finite with shape ({self.dim},), got {v!r}")
        return np.array([_inverse(iv, float(x)) for iv, x in zip(self.intervals, v)])

    def jacobian_diag(self, values) -> np.ndarray:
        """d theta_i / d v_i evaluated at constrained ``values``."""
        values = np.asarray(values, dtype=float)
        out = np.empty(self.dim)
        for i, (iv, t) in enumerate(zip(self.intervals, values)):
            kind = iv.kind
            if kind == "logit":
                out[i] = (t - iv.lo) * (iv.hi - t) / (iv.hi - iv.lo)
            elif kind == "log_lower":
                out[i] = t - iv.lo
            elif kind == "log_upper":
                out[i] = iv.hi - t
            else:
                out[i] = 1.0
        return out

    def grad_to_unconstrained(self, values, grad) -> np.ndarray:
        """Chain rule: gradient w.r.t. natural parameters -> unconstrained."""
        return np.asarray(grad, dtype=float) * self.jacobian_diag(values)


def _nudged(iv: Interval, t: float) -> float:
    width = iv.hi - iv.lo if iv.kind == "logit" else max(1.0, abs(t))
    if iv.lo_closed and t == iv.lo:
        return t + _CLOSED_NUDGE * width
    if iv.hi_closed and t == iv.hi:
        return t - _CLOSED_NUDGE * width
    return t


def _forward(iv: Interval, t: float, name: str) -> float:
    t = _nudged(iv, t)
    kind = iv.kind
    if kind == "identity":
        return t
    if kind == "log_lower":
        if t <= iv.lo:
            raise DomainError(f"{name}={t!r} on the open boundary {iv.lo}")
        return math.log(t - iv.lo)
    if kind == "log_upper":
        if t >= iv.hi:
            raise DomainError(f"{name}={t!r} on the open boundary {iv.hi}")
        return math.log(iv.hi - t)
    if t <= iv.lo or t >= iv.hi:
        raise DomainError(f"{name}={t!r} on the open boundary of {iv}")
    return math.log(t - iv.lo) - math.log(iv.hi - t)


def _inverse(iv: Interval, v: float) -> float:
    kind = iv.kind
    if kind == "identity":
        return v
    if kind in ("log_lower", "log_upper"):
        # exp(709.78) is the largest finite double
        e = math.exp(min(v, _MAX_LOG))
        if e == 0.0:
            e = math.ulp(0.0)
        if kind == "log_lower":
            t = iv.lo + e
            return t if t > iv.lo else math.nextafter(iv.lo, math.inf)
        t = iv.hi - e
        return t if t < iv.hi else math.nextafter(iv.hi, -math.inf)
    width = iv.hi - iv.lo
    # numerically stable logistic on both tails
    if v >= 0:
        e = math.exp(-v)
        t = iv.lo + width / (1.0 + e)
    else:
        e = math.exp(v)
        t = iv.lo + width * e / (1.0 + e)
    # saturation must not land exactly on an open endpoint
    if t <= iv.lo:
        t = math.nextafter(iv.lo, iv.hi)
    elif t >= iv.hi:
        t = math.nextafter(iv.hi, iv.lo)
    return t


@dataclass
class ParameterVector:
    """A parameter value together with the domain it must live in."""

    values: np.ndarray
    domain: Domain = field(repr=False)

    def __post_init__(self):
        self.values = self.domain.check(self.values).copy()

    def to_unconstrained(self) -> np.ndarray:
        return self.domain.to_unconstrained(self.values)

    @classmethod
    def from_unconstrained(cls, v, domain: Domain) -> "ParameterVector":
        return cls(domain.from_unconstrained(v), domain)

    def as_dict(self) -> dict:
        return {n: float(v) for n, v in zip(self.domain.names, self.values)}


def to_unconstrained(theta: ParameterVector) -> np.ndarray:
    return theta.to_unconstrained()


def from_unconstrained(v, domain: Domain) -> ParameterVector:
    return ParameterVector.from_unconstrained(v, domain)
