"""Gaussian upper tail H(x), log H(x) and the hazard function A(x) = -(log H)'(x).

All functions accept scalars or numpy arrays and return float / ndarray.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from ._optim import golden_max
from .errors import DomainError

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class EvalPolicy:
    """Branch thresholds for log H.

    Above ``asym_switch_pos`` the tail is written as exp(-x^2/2) times the scaled
    complementary error function, so nothing underflows. For negative x the value is
    log1p(-H(-x)), which is accurate on the whole half-line; ``asym_switch_neg`` marks
    where H(-x) drops below machine epsilon and is kept for interface symmetry.
    ``quad_tol`` is the relative tolerance requested from quadrature oracles in tests.
    """

    asym_switch_pos: float = 8.0
    asym_switch_neg: float = -8.0
    quad_tol: float = 1e-12

    def __post_init__(self):
        if not (self.asym_switch_pos > 0 and math.isfinite(self.asym_switch_pos)):
            raise DomainError("asym_switch_pos must be positive and finite")
        if not (self.asym_switch_neg < 0 and math.isfinite(self.asym_switch_neg)):
            raise DomainError("asym_switch_neg must be negative and finite")
        if not self.quad_tol > 0:
            raise DomainError("quad_tol must be positive")


DEFAULT_POLICY = EvalPolicy()


def _as_finite(x):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("argument must be finite")
    return arr


def _out(arr):
    return float(arr) if arr.ndim == 0 else arr


def gauss_tail(x):
    """H(x) = P(Z > x) for a standard normal Z."""
    arr = _as_finite(x)
    return _out(0.5 * special.erfc(arr / _SQRT2))


def _log_scaled_tail(arr, policy):
    """log H(x) + x^2/2, evaluated without cancellation for large positive x."""
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        direct = _log_tail_core(arr, policy) + 0.5 * arr * arr
        scaled = np.log(0.5 * special.erfcx(arr / _SQRT2))
    return np.where(arr > policy.asym_switch_pos, scaled, direct)


def _log_tail_core(arr, policy):
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        # H(|x|); for x < 0 use H(x) = 1 - H(-x)
        t = 0.5 * special.erfc(np.abs(arr) / _SQRT2)
        neg = np.log1p(-t)
        pos = np.where(arr <= policy.asym_switch_pos, np.log(t),
                       np.log(0.5 * special.erfcx(arr / _SQRT2)) - 0.5 * arr * arr)
    return np.where(arr < 0, neg, pos)


def log_gauss_tail(x, policy: EvalPolicy = DEFAULT_POLICY):
    """log H(x), finite for |x| up to ~1e150."""
    return _out(_log_tail_core(np.asarray(_as_finite(x)), policy))


def mills_a(x, policy: EvalPolicy = DEFAULT_POLICY):
    """A(x) = phi(x)/H(x), evaluated in log space.

    Underflows to 0.0 below x ~ -38.5, where the true value is < 1e-320.
    """
    arr = np.asarray(_as_finite(x))
    return _out(np.exp(-LOG_SQRT_2PI - _log_scaled_tail(arr, policy)))


# coefficients of A(x) - x = 1/x - 2/x^3 + 10/x^5 - 74/x^7 + 706/x^9
_GAP_SERIES = (1.0, -2.0, 10.0, -74.0, 706.0)
_SERIES_SWITCH = 100.0


def _gap_series(x):
    y = 1.0 / (x * x)
    acc = np.zeros_like(x)
    for c in reversed(_GAP_SERIES):
        acc = acc * y + c
    return acc / x


def mills_a_prime(x, policy: EvalPolicy = DEFAULT_POLICY):
    """A'(x) = A(x) (A(x) - x), which lies in (0, 1)."""
    return mills_a_pair(x, policy)[1]


def mills_a_pair(x, policy: EvalPolicy = DEFAULT_POLICY):
    """(A(x), A'(x)) from a single tail evaluation."""
    arr = np.asarray(_as_finite(x))
    a = np.exp(-LOG_SQRT_2PI - _log_scaled_tail(arr, policy))
    # direct subtraction loses digits once A ~ x; use the asymptotic gap there
    with np.errstate(divide="ignore", invalid="ignore"):
        gap = np.where(arr > _SERIES_SWITCH, _gap_series(arr), a - arr)
    return _out(a), _out(a * gap)


def sup_x_a_neg(return_argmax: bool = False, step: float = 1e-4, x_max: float = 6.0):
    """sup over x > 0 of x A(-x): dense scan followed by golden-section refinement."""
    grid = np.arange(step, x_max + step / 2, step)
    vals = grid * mills_a(-grid)
    i = int(np.argmax(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    x, fx, _ = golden_max(lambda t: t * mills_a(-t), lo, hi, rtol=1e-12)
    fx = max(fx, float(vals[i]))
    return (fx, x) if return_argmax else fx


def shift_bound_margin(x, y):
    """H(x) exp(-A(x) y) - H(x + y); non-negative by log-concavity of H for y >= 0."""
    x, y = _as_finite(x), _as_finite(y)
    lh = log_gauss_tail(x)
    return _out(np.exp(lh - mills_a(x) * y) - np.exp(log_gauss_tail(x + y)))


def cosh_cos_margin(x, y):
    """exp(2y^2 - x^2) - (cosh 2y + cos 2x)/2 for real x, y."""
    x, y = _as_finite(x), _as_finite(y)
    return _out(np.exp(2 * y * y - x * x) - 0.5 * (np.cosh(2 * y) + np.cos(2 * x)))
