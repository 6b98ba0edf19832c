"""Max-min machinery: inner minimization over V, outer maximization over U.

The inner problem on the Plain branch is solved through the stationarity equation

    U = V + (delta - delta1) A(a1/U - V) + (1 - delta) A(a2/U - V),

whose right side is strictly increasing in V because 0 < A' < 1.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._optim import local_maxima, zoom_max, zoom_min_rows
from .errors import DegenerateParametersError, DomainError, NoRootError, NumericError
from .functional import Branch, FunctionalValue, ModelParams, a_star, c_star, fd_array
from .specfun import (_SERIES_SWITCH, _gap_series, log_gauss_tail, mills_a, mills_a_pair,
                      mills_a_prime)

log = logging.getLogger(__name__)

V_TOL = 1e-12
_V_SCAN = 161


@dataclass(frozen=True)
class SaddleResult:
    u_star: float
    v_star: float
    value: float
    d_at_saddle: float
    branch: Branch
    v_residual: float
    u_bracket: tuple
    plain_value: float = math.nan
    n_candidates: int = 1


class Phi0(NamedTuple):
    value: float
    u: float


def _weights(params):
    return params.delta - params.delta1, 1.0 - params.delta


def _eqv(u, v, params):
    """Residual V + w1 A(x1) + w2 A(x2) - U and its V-derivative.

    With A(x) = x + g(x) the V terms cancel to delta1 * V exactly, so the residual
    stays accurate when the bracket expands to very negative V.
    """
    a1, a2 = a_star(params)
    w1, w2 = _weights(params)
    x1 = a1 / u - v
    A1, A1p = mills_a_pair(x1)
    r = params.delta1 * v + w1 * (a1 / u + _gap(x1, A1)) - u
    s = 1.0 - w1 * A1p
    if math.isinf(a2):
        r = r + w2 * v
    else:
        x2 = a2 / u - v
        A2, A2p = mills_a_pair(x2)
        r = r + w2 * (a2 / u + _gap(x2, A2))
        s = s - w2 * A2p
    return r, s


def _gap(x, a):
    """A(x) - x, from the asymptotic series where direct subtraction cancels."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x > _SERIES_SWITCH, _gap_series(np.maximum(x, 1.0)), a - x)


def _v_bracket(u, params):
    lo = np.minimum(0.0, u - 1.0) - 5.0
    hi = u + _eqv(u, u, params)[0] + 1.0
    return lo, hi


def _solve_v_vec(u, params, tol=V_TOL):
    """Solve the stationarity equation for every entry of ``u``.

    Returns (v, residual, ok); entries without a sign change get v = nan, ok = False.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    lo, hi = _v_bracket(u, params)
    g_lo = _eqv(u, lo, params)[0]
    width = 5.0
    for _ in range(60):
        bad = g_lo >= 0
        if not bad.any():
            break
        width *= 2.0
        lo = np.where(bad, lo - width, lo)
        g_lo = _eqv(u, lo, params)[0]
    ok = g_lo < 0
    v = np.where(ok, 0.5 * (lo + hi), np.nan)
    lo = np.where(ok, lo, 0.0)
    hi = np.where(ok, hi, 0.0)
    uu = np.where(ok, u, 1.0)
    v = np.where(ok, v, 0.0)
    done = ~ok
    for _ in range(200):
        g, s = _eqv(uu, v, params)
        small = np.abs(g) <= 0.05 * tol
        pos = g > 0
        hi = np.where(pos & ~done, v, hi)
        lo = np.where(~pos & ~done, v, lo)
        newton = v - g / s
        inside = (newton > lo) & (newton < hi)
        v_new = np.where(inside, newton, 0.5 * (lo + hi))
        tight = (hi - lo) <= 4.0 * np.spacing(np.maximum(np.abs(lo), np.abs(hi)))
        done = done | small | tight
        v = np.where(done, v, v_new)
        if done.all():
            break
    res = np.abs(_eqv(uu, v, params)[0])
    v = np.where(ok, v, np.nan)
    res = np.where(ok, res, np.nan)
    return v, res, ok


def solve_v(u: float, params: ModelParams) -> float:
    """Unique root V(U) of the stationarity equation."""
    if not (u > 0 and math.isfinite(u)):
        raise DomainError("u must be positive and finite")
    v, res, ok = _solve_v_vec(u, params)
    if not ok[0]:
        lo, hi = _v_bracket(np.asarray(u, dtype=float), params)
        raise NoRootError("stationarity residual has no sign change", (-math.inf, float(hi)))
    if not res[0] <= V_TOL:
        raise NumericError(f"stationarity residual {res[0]:.3e} above {V_TOL}")
    return float(v[0])


class _Inner(NamedTuple):
    value: np.ndarray
    v: np.ndarray
    d: np.ndarray
    plain_value: np.ndarray
    residual: np.ndarray


def _modified_min(u, params, v_star):
    """Minimize the piecewise functional over V by scan plus zoom refinement, one row per u."""
    lo, hi = _v_bracket(u, params)
    hi = np.where(np.isfinite(v_star), np.maximum(hi, v_star + 1.0), hi)
    for _ in range(40):
        t = np.linspace(0.0, 1.0, _V_SCAN)
        grid = lo[:, None] + (hi - lo)[:, None] * t[None, :]
        vals = fd_array(u[:, None], grid, params, params.delta1)[0]
        j = np.argmin(vals, axis=1)
        at_edge = j == 0
        if not at_edge.any():
            break
        # minimum sits on the left end: widen the scan window leftwards
        lo = np.where(at_edge, lo - 2.0 * (hi - lo), lo)
    rows = np.arange(len(u))
    step = (hi - lo) / (_V_SCAN - 1)
    a = grid[rows, j] - step
    b = grid[rows, j] + step

    def obj(vv):
        return fd_array(u, vv, params, params.delta1)[0]

    v_opt, f_opt = zoom_min_rows(lambda vv: fd_array(u[:, None], vv, params, params.delta1)[0],
                                 a, b, rtol=1e-10, atol=1e-10)
    best_grid = vals[rows, j]
    use_grid = best_grid < f_opt
    v_opt = np.where(use_grid, grid[rows, j], v_opt)
    if np.isfinite(v_star).any():
        f_star = np.where(np.isfinite(v_star), obj(np.where(np.isfinite(v_star), v_star, 0.0)), np.inf)
        take = f_star < np.minimum(f_opt, best_grid)
        v_opt = np.where(take, v_star, v_opt)
    return v_opt


def _inner_many(u, params, plain=False, skip_below=None):
    u = np.atleast_1d(np.asarray(u, dtype=float))
    v, res, ok = _solve_v_vec(u, params)
    v_eval = np.where(ok, v, 0.0)
    val, d, pv = fd_array(u, v_eval, params, params.delta1)
    if plain:
        # without a root F0 is unbounded below in V
        val = np.where(ok, pv, -np.inf)
        return _Inner(val, v, np.where(ok, d, np.nan), val, res)
    need = ~ok | (d < 0)
    if skip_below is not None and need.any():
        # any F^D(V) bounds min_V F^D from above; rows whose bound falls below the
        # target cannot hold the maximum and are left with that bound
        idx = np.nonzero(need)[0]
        lo, hi = _v_bracket(u[idx], params)
        t = np.linspace(0.0, 1.0, 17)
        coarse = fd_array(u[idx, None], lo[:, None] + (hi - lo)[:, None] * t, params, params.delta1)[0]
        ub = np.min(coarse, axis=1)
        ub = np.where(ok[idx], np.minimum(ub, val[idx]), ub)
        drop = ub < skip_below
        val = val.copy()
        val[idx[drop]] = ub[drop]
        need[idx[drop]] = False
    if need.any():
        idx = np.nonzero(need)[0]
        v_mod = _modified_min(u[idx], params, v[idx])
        val_m, d_m, pv_m = fd_array(u[idx], v_mod, params, params.delta1)
        val = val.copy(); d = d.copy(); pv = pv.copy(); v = v.copy()
        val[idx], d[idx], pv[idx], v[idx] = val_m, d_m, pv_m, v_mod
        res = res.copy()
        res[idx] = np.abs(_eqv(u[idx], v_mod, params)[0])
    return _Inner(val, v, d, pv, res)


def inner_min(u: float, params: ModelParams, plain: bool = False) -> FunctionalValue:
    """min over V of the piecewise functional at fixed U (or of F0 when ``plain``)."""
    if not (u > 0 and math.isfinite(u)):
        raise DomainError("u must be positive and finite")
    r = _inner_many(u, params, plain)
    d = float(r.d[0])
    branch = Branch.MODIFIED if (not plain and d < 0) else Branch.PLAIN
    return FunctionalValue(float(r.value[0]), d, branch, float(r.plain_value[0]), float(u), float(r.v[0]))


def maximize_u(params: ModelParams, *, plain: bool = False, u_max: float = 10.0,
               u_min: float | None = None, n_grid: int = 2000) -> SaddleResult:
    """Outer maximization over U in (0, u_max]: log-spaced scan then zoom refinement."""
    if not u_max > 0:
        raise DomainError("u_max must be positive")
    u_min = u_max * 1e-5 if u_min is None else u_min
    grid = np.geomspace(u_min, u_max, n_grid)
    skip = None
    if not plain:
        # exact Plain rows give a floor for the maximum; see _inner_many
        v0, _, ok0 = _solve_v_vec(grid, params)
        val0, d0, _ = fd_array(grid, np.where(ok0, v0, 0.0), params, params.delta1)
        plain_rows = ok0 & (d0 >= 0)
        if plain_rows.any():
            skip = float(np.max(val0[plain_rows])) - 2e-4
    vals = _inner_many(grid, params, plain, skip_below=skip).value
    finite = np.isfinite(vals)
    if not finite.any():
        raise DegenerateParametersError("inner minimum is -inf or undefined on the whole U grid")
    best = np.max(vals[finite])
    cands = [i for i in local_maxima(vals) if vals[i] >= best - 1e-4]
    close = [i for i in cands if vals[i] >= best - 1e-6]
    if len(close) > 1:
        log.warning("U objective has %d near-equal local maxima at U=%s", len(close),
                    [float(grid[i]) for i in close])

    def obj(t):
        return _inner_many(t, params, plain).value

    found = []
    for i in cands:
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, n_grid - 1)]
        x, fx, br = zoom_max(obj, lo, hi, rtol=1e-11)
        if vals[i] > fx:
            x, fx, br = float(grid[i]), float(vals[i]), (lo, hi)
        found.append((fx, -x, x, br))
    fx, _, u_star, br = max(found)
    r = _inner_many(u_star, params, plain)
    d = float(r.d[0])
    branch = Branch.MODIFIED if (not plain and d < 0) else Branch.PLAIN
    return SaddleResult(u_star=float(u_star), v_star=float(r.v[0]), value=float(r.value[0]),
                        d_at_saddle=d, branch=branch, v_residual=float(r.residual[0]),
                        u_bracket=(float(br[0]), float(br[1])),
                        plain_value=float(r.plain_value[0]), n_candidates=len(close))


def load_constant(alpha):
    return -0.5 * alpha * math.log(alpha) + 0.5 * alpha


def rate_exponent(params: ModelParams, **kw) -> float:
    """max_U min_V F0^D - (alpha/2) log alpha + alpha/2."""
    return maximize_u(params, **kw).value + load_constant(params.alpha)


def phi(u: float, q: float, alpha: float, delta: float) -> float:
    params = ModelParams.symmetric(alpha, delta, q)
    return inner_min(u, params, plain=True).value + load_constant(alpha) + c_star(delta)


def phi0(q: float, alpha: float, delta: float, *, u_max: float = 10.0, n_grid: int = 2000) -> Phi0:
    """(max_U Phi(U, q, alpha, delta), maximizing U)."""
    params = ModelParams.symmetric(alpha, delta, q)
    res = maximize_u(params, plain=True, u_max=u_max, n_grid=n_grid)
    return Phi0(res.value + load_constant(alpha) + c_star(delta), res.u_star)


@dataclass(frozen=True)
class DerivativeTable:
    """Second derivatives of F0 - (alpha/2) log alpha + alpha/2.

    q-derivatives move q and q' together along q' = -q.
    """

    d2_vv: float
    d2_qq: float
    d2_aa: float
    d2_va: float
    d2_ua: float
    d2_uq: float
    d2_uv: float
    d2_vq: float
    a1_prime: float
    a2_prime: float

    def as_dict(self):
        return {k: getattr(self, k) for k in
                ("d2_vv", "d2_qq", "d2_aa", "d2_va", "d2_ua", "d2_uq", "d2_uv", "d2_vq")}


def _scaled_hazards(u, v, params):
    a1, a2 = a_star(params)
    A1 = mills_a(a1 / u - v) / u
    A2 = mills_a(a2 / u - v) / u
    # A_i' = A'(x_i)/U^2 = A_i (A_i - a_i/U^2 + V/U)
    A1p = mills_a_prime(a1 / u - v) / (u * u)
    A2p = mills_a_prime(a2 / u - v) / (u * u)
    return a1, a2, A1, A2, A1p, A2p


def derivative_table(u: float, v: float, params: ModelParams) -> DerivativeTable:
    if not u > 0:
        raise DomainError("u must be positive")
    d, al = params.delta, params.alpha
    a1, a2, A1, A2, A1p, A2p = _scaled_hazards(u, v, params)
    s_plus = d * A1p + (1 - d) * A2p
    s_minus = d * A1p - (1 - d) * A2p
    return DerivativeTable(
        d2_vv=1.0 - u * u * s_plus,
        d2_qq=-s_plus,
        d2_aa=-s_plus - 0.5 / al,
        d2_va=u * s_plus,
        d2_ua=(1.0 + d * (A1 + a1 * A1p) + (1 - d) * (A2 + a2 * A2p)) / u,
        d2_uq=(d * (A1 + a1 * A1p) - (1 - d) * (A2 + a2 * A2p)) / u,
        d2_uv=-1.0 - d * a1 * A1p - (1 - d) * a2 * A2p,
        d2_vq=u * s_minus,
        a1_prime=A1p,
        a2_prime=A2p,
    )


class PhiPartials(NamedTuple):
    d_q: float
    d_alpha: float
    d_delta: float
    v: float


def phi_partials(u: float, q: float, alpha: float, delta: float) -> PhiPartials:
    """First partials of Phi(U, q, alpha, delta) at fixed U (envelope theorem in V)."""
    params = ModelParams.symmetric(alpha, delta, q)
    v = solve_v(u, params)
    a1, a2, A1, A2, _, _ = _scaled_hazards(u, v, params)
    d_q = -delta * A1 + (1 - delta) * A2
    d_alpha = -delta * A1 - (1 - delta) * A2 + math.log(u) - 0.5 * math.log(alpha)
    lh1 = log_gauss_tail(a1 / u - v)
    lh2 = log_gauss_tail(a2 / u - v)
    d_f0 = lh1 - lh2 + 2 * delta * A1 - 2 * (1 - delta) * A2
    d_ent = math.log1p(-delta) - math.log(delta) if delta > 0 else math.inf
    return PhiPartials(d_q, d_alpha, d_f0 + d_ent, v)


class PhiCross(NamedTuple):
    d2_u_alpha: float
    d2_u_q: float


def phi_cross(u: float, q: float, alpha: float, delta: float) -> PhiCross:
    """Mixed U-derivatives of Phi, with V = V(U) eliminated: F_xU - F_xV F_VU / F_VV."""
    params = ModelParams.symmetric(alpha, delta, q)
    v = solve_v(u, params)
    t = derivative_table(u, v, params)
    dv_du = -t.d2_uv / t.d2_vv
    return PhiCross(t.d2_ua + t.d2_va * dv_du, t.d2_uq + t.d2_vq * dv_du)
