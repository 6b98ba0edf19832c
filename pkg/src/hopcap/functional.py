"""Rate functionals F0, F0^D, F1^D, the curvature term D and the entropy C*."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import special

from .errors import DomainError
from .specfun import log_gauss_tail, mills_a

# bands for the shifted thresholds inside the certification region
A1_BAND = (1.0, 1.25)
A2_BAND = (-1.1, -0.85)
CERT_REGION = {"alpha": (0.071, 0.1133), "delta": (0.0035, 0.00778), "q": (0.0, 0.13)}


class Branch(str, Enum):
    PLAIN = "Plain"
    MODIFIED = "Modified"


@dataclass(frozen=True)
class ModelParams:
    """Load alpha, flip fraction delta, threshold shifts q, q' and the excluded prefix delta1.

    ``q_prime = -inf`` is accepted and removes the unflipped block (log H(-inf) = 0).
    ``region_check`` enables the threshold-band checks valid in the certification region.
    """

    alpha: float
    delta: float
    q: float = 0.0
    q_prime: float = 0.0
    delta1: float = 0.0
    region_check: bool = False

    def __post_init__(self):
        for name in ("alpha", "delta", "q", "delta1"):
            val = getattr(self, name)
            if not isinstance(val, (int, float, np.floating, np.integer)) or not math.isfinite(val):
                raise DomainError(f"{name} must be a finite real, got {val!r}")
        if math.isnan(self.q_prime) or self.q_prime == math.inf:
            raise DomainError("q_prime must be finite or -inf")
        if not self.alpha > 0:
            raise DomainError(f"alpha must be > 0, got {self.alpha}")
        if not 0.0 <= self.delta <= 1.0:
            raise DomainError(f"delta must lie in [0, 1], got {self.delta}")
        if not 0.0 <= self.delta1 <= self.delta:
            raise DomainError(f"delta1 must lie in [0, delta], got {self.delta1}")
        if self.region_check:
            a1, a2 = self.a_star
            if not A1_BAND[0] < a1 < A1_BAND[1]:
                raise DomainError(f"a1*={a1:.6g} outside {A1_BAND}")
            if not A2_BAND[0] < a2 < A2_BAND[1]:
                raise DomainError(f"a2*={a2:.6g} outside {A2_BAND}")

    @classmethod
    def symmetric(cls, alpha, delta, q=0.0, **kw):
        """Parameters with q' = -q, the family used by the capacity certificate."""
        return cls(alpha, delta, q, -q, **kw)

    @property
    def a_star(self):
        return a_star(self)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class FunctionalValue:
    value: float
    d_value: float
    branch: Branch
    plain_value: float
    u: float
    v: float


def a_star(params: ModelParams):
    a1 = params.alpha + 1.0 - 2.0 * params.delta + params.q
    a2 = params.alpha - 1.0 + 2.0 * params.delta + params.q_prime
    return a1, a2


def _check_u(u):
    u = np.asarray(u, dtype=float)
    if not np.all(u > 0) or not np.all(np.isfinite(u)):
        raise DomainError("u must be positive and finite")
    return u


def _blocks(u, v, params, delta1):
    """Weights, log-H values and scaled hazards of the two blocks."""
    a1, a2 = a_star(params)
    w1 = params.delta - delta1
    w2 = 1.0 - params.delta
    x1 = a1 / u - v
    lh1 = log_gauss_tail(x1)
    A1 = mills_a(x1) / u
    if math.isinf(a2):
        lh2 = np.zeros_like(x1)
        A2 = np.zeros_like(x1)
    else:
        x2 = a2 / u - v
        lh2 = log_gauss_tail(x2)
        A2 = mills_a(x2) / u
    return w1, w2, lh1, lh2, A1, A2


def _quad_part(u, v, alpha):
    return -u * v + 0.5 * v * v + alpha * np.log(u)


def _log_part(w1, w2, lh1, lh2):
    # zero weights must not multiply -inf-like values into NaN
    t1 = w1 * lh1 if w1 != 0.0 else 0.0 * lh1
    t2 = w2 * lh2 if w2 != 0.0 else 0.0 * lh2
    return t1 + t2


def _d_general(w1, w2, A1, A2, delta1):
    core = 0.5 - w1 * A1 - w2 * A2 - 0.5 * w1 * w2 * (A1 - A2) ** 2
    return core / (1.0 - delta1) if delta1 != 0.0 else core


def f0_array(u, v, params: ModelParams, delta1: float = 0.0):
    u = _check_u(u)
    v = np.asarray(v, dtype=float)
    w1, w2, lh1, lh2, _, _ = _blocks(u, v, params, delta1)
    return _log_part(w1, w2, lh1, lh2) + _quad_part(u, v, params.alpha)


def fd_array(u, v, params: ModelParams, delta1: float = 0.0):
    """Vectorized piecewise functional: returns (value, D, plain value)."""
    u = _check_u(u)
    v = np.asarray(v, dtype=float)
    w1, w2, lh1, lh2, A1, A2 = _blocks(u, v, params, delta1)
    d = _d_general(w1, w2, A1, A2, delta1)
    logp = _log_part(w1, w2, lh1, lh2)
    quad = _quad_part(u, v, params.alpha)
    denom = np.where(d < 0, 1.0 - 2.0 * d, 1.0)
    return logp / denom + quad, d, logp + quad


def f0(u, v, params: ModelParams) -> float:
    """F0(u, v) = delta log H(a1/u - v) + (1-delta) log H(a2/u - v) - uv + v^2/2 + alpha log u."""
    return _scalar(f0_array(u, v, params))


def big_d(u, v, params: ModelParams) -> float:
    u = _check_u(u)
    w1, w2, _, _, A1, A2 = _blocks(u, np.asarray(v, dtype=float), params, 0.0)
    return _scalar(_d_general(params.delta, w2, A1, A2, 0.0))


def big_d1(u, v, params: ModelParams) -> float:
    """D^1 with the (1 - delta1)^-1 prefactor; equals big_d when delta1 = 0."""
    u = _check_u(u)
    w1, w2, _, _, A1, A2 = _blocks(u, np.asarray(v, dtype=float), params, params.delta1)
    return _scalar(_d_general(w1, w2, A1, A2, params.delta1))


def _fv(u, v, params, delta1):
    val, d, plain = fd_array(u, v, params, delta1)
    d = _scalar(d)
    branch = Branch.MODIFIED if d < 0 else Branch.PLAIN
    return FunctionalValue(_scalar(val), d, branch, _scalar(plain), float(u), float(v))


def f0_d(u, v, params: ModelParams) -> FunctionalValue:
    """Piecewise F0^D: where D < 0 the log-H block is divided by 1 - 2D."""
    return _fv(u, v, params, 0.0)


def f1_d(u, v, params: ModelParams) -> FunctionalValue:
    """Generalized family with the first delta1 fraction of flipped sites excluded."""
    return _fv(u, v, params, params.delta1)


def c_star(delta):
    """Binary entropy in nats, with C*(0) = 0."""
    d = np.asarray(delta, dtype=float)
    if not np.all((d >= 0) & (d < 1)):
        raise DomainError("delta must lie in [0, 1)")
    return _scalar(-special.xlogy(d, d) - special.xlog1py(1.0 - d, -d))


def c_star_prime(delta):
    d = np.asarray(delta, dtype=float)
    if not np.all((d > 0) & (d < 1)):
        raise DomainError("delta must lie in (0, 1)")
    return _scalar(np.log1p(-d) - np.log(d))


def in_cert_region(alpha, delta, q=0.0):
    return all(lo <= val <= hi for (lo, hi), val in
               zip(CERT_REGION.values(), (alpha, delta, q)))


def _scalar(x):
    arr = np.asarray(x)
    return float(arr) if arr.ndim == 0 else arr
