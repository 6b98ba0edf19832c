"""Capacity certificate, critical pair, delta window, region checks and the small-load bound."""
from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np

from ._optim import golden_min
from .errors import DomainError, NonConvergenceError, WindowCollapsedError
from .functional import ModelParams, c_star
from .saddle import (load_constant, maximize_u, phi0, phi_cross, phi_partials,
                     rate_exponent)
from .specfun import log_gauss_tail

log = logging.getLogger(__name__)

CERT_REGIONS = ((0.1105, 0.113, 0.00645), (0.095, 0.1105, 0.0042), (0.071, 0.095, 0.0035))
U_BAND = (0.25, 0.41)
# k_c = delta_c / alpha_c^2 at the critical pair
K_C = 0.00777 / 0.11326 ** 2
# fewest q-intervals for which the grid curvature estimate is trusted
MIN_INTERVALS = 20


class Verdict(str, Enum):
    HOLDS = "Holds"
    FAILS = "Fails"
    INDETERMINATE = "Indeterminate"


class HypothesisWarning(UserWarning):
    """A closed-form bound was evaluated outside its stated regime."""


@dataclass(frozen=True)
class Certificate:
    alpha: float
    delta: float
    q_max: float
    q_step: float
    worst_margin: float
    worst_q: float
    cond_t317: bool
    cond_t318: tuple
    prop3_q0_ok: bool
    verdict: Verdict
    margin_bound: float = math.nan
    lipschitz: float = math.nan
    curvature: float = math.nan
    low_u_value: float = math.nan
    side_values: tuple = ()
    q0_value: float = math.nan
    u_saddle: float = math.nan
    q_grid: tuple = field(default=(), repr=False)
    g_values: tuple = field(default=(), repr=False)


@dataclass(frozen=True)
class CriticalPoint:
    alpha_c: float
    delta_c: float
    residual_phi: float
    residual_dphi: float
    u_c: float = math.nan
    dphi_envelope: float = math.nan
    iterations: int = 0
    trace: tuple = field(default=(), repr=False)


class DeltaWindow(NamedTuple):
    delta1: float
    delta2: float
    delta3: float


def _map(fn, items, workers):
    if workers and workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def _g_point(args):
    alpha, delta, q = args
    return rate_exponent(ModelParams.symmetric(alpha, delta, q)) + c_star(delta)


def q_grid(q_max, q_step):
    n = int(math.floor(q_max / q_step + 1e-9))
    grid = [k * q_step for k in range(n + 1)]
    if q_max - grid[-1] > 1e-12:
        grid.append(q_max)
    return grid


def low_u_value(alpha, delta):
    """max over U <= sqrt(alpha) of min_V F0^D(q = q' = 0) plus the load and entropy terms."""
    res = maximize_u(ModelParams(alpha, delta), u_max=math.sqrt(alpha))
    return res.value + load_constant(alpha) + c_star(delta)


def q0_value(alpha, delta, q):
    """The same max-min with the unflipped block removed (q' = -inf) at threshold shift q."""
    res = maximize_u(ModelParams(alpha, delta, q, -math.inf))
    return res.value + load_constant(alpha) + c_star(delta)


def certify_theorem3(alpha: float, delta: float, q_max: float = 0.131, q_step: float = 1e-3,
                     *, workers: int = 1) -> Certificate:
    """Check the capacity condition G(q) < 0 on a q-grid, with side conditions.

    G(q) = rate_exponent(alpha, delta, q, -q) + C*(delta). If G'' >= -K between two
    nodes, G stays below the chord plus K h^2 / 8 there. K is estimated as twice the
    largest negative second difference, and grids with fewer than MIN_INTERVALS
    intervals are Indeterminate; upward kinks (a new maximizer in U taking
    over) cannot lift G above the chord and do not enter the bound. The Lipschitz
    estimate 2 max|dG|/h is reported alongside.
    """
    for name, val in (("alpha", alpha), ("q_max", q_max), ("q_step", q_step)):
        if not (math.isfinite(val) and val > 0):
            raise DomainError(f"{name} must be positive and finite, got {val}")
    if not 0 <= delta < 1:
        raise DomainError(f"delta must lie in [0, 1), got {delta}")
    grid = q_grid(q_max, q_step)
    g = np.array(_map(_g_point, [(alpha, delta, q) for q in grid], workers))
    k = int(np.argmax(g))  # first index on ties, i.e. smaller q
    worst, worst_q = float(g[k]), float(grid[k])
    steps = np.diff(grid)
    if len(g) >= MIN_INTERVALS + 1:
        slopes = np.diff(g) / steps
        lip = 2.0 * float(np.max(np.abs(slopes)))
        second = 2.0 * np.diff(slopes) / (steps[1:] + steps[:-1])
        curv = 2.0 * max(0.0, -float(np.min(second)))
        bound = worst + curv * float(np.max(steps)) ** 2 / 8.0
    else:
        # too few nodes to estimate curvature from the grid itself
        lip = curv = bound = math.inf

    p0, u0 = phi0(0.0, alpha, delta)
    part = phi_partials(u0, 0.0, alpha, delta)
    side_vals = (p0, part.d_q, part.d_alpha)
    side = (p0 < 0, part.d_q < 0, part.d_alpha > 0)
    low_u = low_u_value(alpha, delta)
    q0v = q0_value(alpha, delta, q_max)
    side_ok = all(side) and low_u < 0 and q0v < 0
    if worst >= 0:
        verdict = Verdict.FAILS
    elif bound < 0 and side_ok:
        verdict = Verdict.HOLDS
    else:
        verdict = Verdict.INDETERMINATE
    return Certificate(alpha=alpha, delta=delta, q_max=q_max, q_step=q_step,
                       worst_margin=worst, worst_q=worst_q, cond_t317=bool(low_u < 0),
                       cond_t318=tuple(bool(c) for c in side), prop3_q0_ok=bool(q0v < 0),
                       verdict=verdict, margin_bound=bound, lipschitz=lip, curvature=curv,
                       low_u_value=low_u, side_values=side_vals, q0_value=q0v, u_saddle=u0,
                       q_grid=tuple(grid), g_values=tuple(float(x) for x in g))


def dphi0_ddelta(alpha, delta, step=1e-6):
    """Central finite difference of Phi_0(0, alpha, .) at delta."""
    return (phi0(0.0, alpha, delta + step).value - phi0(0.0, alpha, delta - step).value) / (2 * step)


def _critical_system(x):
    alpha, delta = x
    val, u = phi0(0.0, alpha, delta)
    # envelope form of d Phi_0 / d delta: smooth and free of differencing noise
    return np.array([val, phi_partials(u, 0.0, alpha, delta).d_delta]), u


def critical_pair(seed_alpha: float = 0.11, seed_delta: float = 0.008, *,
                  max_iter: int = 100, tol: float = 1e-11, jac_step: float = 1e-6) -> CriticalPoint:
    """Solve Phi_0(0, a, d) = 0 and dPhi_0/dd (0, a, d) = 0 by damped Newton."""
    if not (0 < seed_alpha < 0.2 and 0 < seed_delta < 0.02):
        raise DomainError("seeds must lie in (0, 0.2) x (0, 0.02)")
    x = np.array([seed_alpha, seed_delta], dtype=float)
    f, u = _critical_system(x)
    trace = [(float(x[0]), float(x[1]), float(f[0]), float(f[1]))]
    # residual scaling: Phi_0 is O(1e-3), its delta-slope O(1)
    scale = np.array([1.0, 1e-3])
    for it in range(1, max_iter + 1):
        jac = np.empty((2, 2))
        for j in range(2):
            e = np.zeros(2)
            e[j] = jac_step * x[j]
            jac[:, j] = (_critical_system(x + e)[0] - _critical_system(x - e)[0]) / (2 * e[j])
        step = np.linalg.solve(jac, -f)
        lam = 1.0
        norm0 = np.linalg.norm(f * scale)
        for _ in range(30):
            xn = x + lam * step
            if xn[0] > 0 and 0 < xn[1] < 0.5:
                fn, un = _critical_system(xn)
                if np.linalg.norm(fn * scale) < norm0 or lam < 1e-6:
                    break
            lam *= 0.5
        else:
            raise NonConvergenceError("line search failed", trace)
        x, f, u = xn, fn, un
        trace.append((float(x[0]), float(x[1]), float(f[0]), float(f[1])))
        if np.all(np.abs(lam * step) <= tol * np.maximum(np.abs(x), 1e-3)) or \
                (abs(f[0]) < 1e-14 and abs(f[1]) < 1e-11):
            break
    else:
        raise NonConvergenceError(f"Newton did not converge in {max_iter} iterations", trace)
    fd = dphi0_ddelta(x[0], x[1])
    return CriticalPoint(alpha_c=float(x[0]), delta_c=float(x[1]), residual_phi=abs(float(f[0])),
                         residual_dphi=abs(fd), u_c=float(u), dphi_envelope=float(f[1]),
                         iterations=it, trace=tuple(trace))


def _bisect(fn, a, fa, b, fb, xtol):
    while b - a > xtol:
        m = 0.5 * (a + b)
        fm = fn(m)
        if (fm < 0) == (fa < 0):
            a, fa = m, fm
        else:
            b, fb = m, fm
    return 0.5 * (a + b)


def delta_window(alpha: float, *, delta_max: float = 0.15, step: float = 2.5e-4,
                 rel_step: float = 0.02, xtol: float = 1e-10, tangency_tol: float = 1e-9,
                 n_grid: int = 600) -> DeltaWindow:
    """First three sign changes of delta -> Phi_0(0, alpha, delta).

    The coarse delta scan uses step max(step, rel_step * delta). Sign changes are
    bisected; positive local minima after the first root are refined by golden
    section so that narrow windows and tangencies are not missed.
    """
    if not alpha > 0:
        raise DomainError("alpha must be positive")

    def f(d):
        return phi0(0.0, alpha, d, n_grid=n_grid).value

    roots = []
    best = (math.inf, math.nan)
    hist = [(0.0, f(0.0))]
    d = 0.0
    while len(roots) < 3 and d < delta_max:
        d = min(d + max(step, rel_step * d), delta_max)
        hist.append((d, f(d)))
        (dp, fp), (dc, fc) = hist[-2], hist[-1]
        if (fc < 0) != (fp < 0):
            roots.append(_bisect(f, dp, fp, dc, fc, xtol))
        elif roots and len(hist) >= 3:
            (d0, f0), (d1, f1) = hist[-3], hist[-2]
            if 0 <= f1 <= f0 and f1 <= fc:
                dm, fm, _ = golden_min(f, d0, dc, rtol=1e-9, atol=1e-12)
                if fm < best[0]:
                    best = (fm, dm)
                if fm < 0:
                    roots.append(_bisect(f, d0, f0, dm, fm, xtol))
                    roots.append(_bisect(f, dm, fm, dc, fc, xtol))
                elif fm <= tangency_tol:
                    roots.extend([dm, dm])
    if len(roots) < 3:
        raise WindowCollapsedError(f"only {len(roots)} sign change(s) of Phi_0 for alpha={alpha}",
                                   best[1], best[0], roots)
    return DeltaWindow(*sorted(roots[:3]))


@dataclass(frozen=True)
class RegionCheck:
    alpha1: float
    alpha2: float
    delta: float
    phi0_alpha2: float
    dphi_dq_u2: float
    dphi_dalpha_u1: float
    u1: float
    u2: float
    low_u_alpha1: float
    low_u_alpha2: float
    cross_min: float
    u_band_ok: bool
    passed: bool
    dense_ok: bool | None = None
    kc_hypothesis: bool = True
    small_delta_hypothesis: bool = True


def check_region(alpha1, alpha2, delta, *, dense=False, dense_step=5e-4):
    """Endpoint conditions for an alpha interval at fixed delta.

    Negativity of Phi_0 at the right end, of dPhi/dq at U2 and positivity of
    dPhi/dalpha at U1 transfer to the whole interval through the monotonicity of the
    maximizer in (q, alpha).
    """
    p2, u2 = phi0(0.0, alpha2, delta)
    _, u1 = phi0(0.0, alpha1, delta)
    dq = phi_partials(u2, 0.0, alpha2, delta).d_q
    da = phi_partials(u1, 0.0, alpha1, delta).d_alpha
    cross = min(min(phi_cross(u, 0.0, a, delta)) for u in (u1, u2) for a in (alpha1, alpha2))
    t1, t2 = low_u_value(alpha1, delta), low_u_value(alpha2, delta)
    band = U_BAND[0] < u1 < u2 < U_BAND[1]
    passed = p2 < 0 and dq < 0 and da > 0 and band and t1 < 0 and t2 < 0 and cross >= 0
    dense_ok = None
    if dense:
        n = int(math.ceil((alpha2 - alpha1) / dense_step))
        dense_ok = True
        for a in np.linspace(alpha1, alpha2, n + 1):
            val, u = phi0(0.0, float(a), delta)
            if not (val < 0 and phi_partials(u, 0.0, float(a), delta).d_q < 0):
                dense_ok = False
                break
        passed = passed and dense_ok
    return RegionCheck(alpha1, alpha2, delta, p2, dq, da, u1, u2, t1, t2, cross, band,
                       bool(passed), dense_ok, delta <= K_C * alpha1 ** 2,
                       delta <= 0.6 * alpha1 ** 2)


def verify_paper_regions(regions=CERT_REGIONS, *, dense: bool = False, workers: int = 1):
    return _map(_region_task, [(a1, a2, d, dense) for a1, a2, d in regions], workers)


def _region_task(args):
    a1, a2, d, dense = args
    return check_region(a1, a2, d, dense=dense)


def theorem2_hypothesis_ok(alpha, delta):
    """alpha <= 0.1 and delta well below alpha^3 log(1/alpha) (taken as a factor 10)."""
    return alpha <= 0.1 and delta <= 0.1 * alpha ** 3 * math.log(1.0 / alpha)


def theorem2_exponent(alpha: float, delta: float) -> float:
    """delta log H((1-2 delta)/sqrt(alpha)) + (1-delta) log H(-(1-2 delta)/sqrt(alpha))."""
    if not alpha > 0 or not 0 <= delta < 1:
        raise DomainError("need alpha > 0 and 0 <= delta < 1")
    if not theorem2_hypothesis_ok(alpha, delta):
        warnings.warn(f"small-load bound used outside its regime (alpha={alpha}, delta={delta})",
                      HypothesisWarning, stacklevel=2)
    x = (1.0 - 2.0 * delta) / math.sqrt(alpha)
    val = (1.0 - delta) * log_gauss_tail(-x)
    if delta > 0:
        val += delta * log_gauss_tail(x)
    return val


def pstar_exponent(alpha: float, delta: float) -> float:
    return c_star(delta) + theorem2_exponent(alpha, delta)


def delta_c_asym(alpha: float) -> float:
    """sqrt(alpha) exp(-1/(2 alpha)) / sqrt(2 pi)."""
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    return math.sqrt(alpha) * math.exp(-0.5 / alpha) / math.sqrt(2.0 * math.pi)
