"""Small deterministic 1-D optimizers used across the package."""
import math

import numpy as np

from .errors import NonConvergenceError

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_max(f, lo, hi, rtol=1e-10, atol=1e-14, max_iter=300):
    """Golden-section maximization of a unimodal scalar function on [lo, hi].

    Returns (x, f(x), (a, b)) where (a, b) is the final bracket.
    """
    a, b = float(lo), float(hi)
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= max(rtol * max(abs(a), abs(b)), atol):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    else:
        raise NonConvergenceError(f"golden section did not converge on [{lo}, {hi}]")
    x, fx = (c, fc) if fc >= fd else (d, fd)
    return x, fx, (a, b)


def golden_min(f, lo, hi, **kw):
    x, fx, br = golden_max(lambda t: -f(t), lo, hi, **kw)
    return x, -fx, br


def local_maxima(vals):
    """Indices of interior or boundary local maxima of a 1-D array (NaN treated as -inf)."""
    v = np.where(np.isnan(vals), -np.inf, vals)
    n = len(v)
    left = np.concatenate(([-np.inf], v[:-1]))
    right = np.concatenate((v[1:], [-np.inf]))
    idx = np.nonzero((v >= left) & (v >= right) & np.isfinite(v))[0]
    # collapse plateaus to their first index
    keep = [i for k, i in enumerate(idx) if k == 0 or idx[k - 1] != i - 1]
    return np.asarray(keep, dtype=int) if n else np.empty(0, dtype=int)


def zoom_max(f_vec, lo, hi, rtol=1e-11, atol=1e-15, points=17, max_rounds=100):
    """Bracketing grid zoom for a unimodal maximum.

    Each round evaluates ``points`` equispaced abscissae in one vectorized call and
    keeps the two cells around the best one, shrinking the bracket by (points-1)/2.
    Returns (x, f(x), (a, b)).
    """
    a, b = float(lo), float(hi)
    x_best, f_best = a, -np.inf
    for _ in range(max_rounds):
        xs = np.linspace(a, b, points)
        fs = np.asarray(f_vec(xs), dtype=float)
        fs = np.where(np.isnan(fs), -np.inf, fs)
        j = int(np.argmax(fs))
        if fs[j] >= f_best:
            x_best, f_best = float(xs[j]), float(fs[j])
        a, b = float(xs[max(j - 1, 0)]), float(xs[min(j + 1, points - 1)])
        if b - a <= max(rtol * max(abs(a), abs(b)), atol):
            return x_best, f_best, (a, b)
    raise NonConvergenceError(f"zoom search did not converge on [{lo}, {hi}]")


def zoom_min_rows(f_mat, lo, hi, rtol=1e-10, atol=1e-12, points=17, max_rounds=100):
    """Row-wise version of ``zoom_max`` for minimization.

    ``f_mat`` maps a (rows, points) array of abscissae to values of the same shape.
    Returns (x, f(x)) per row.
    """
    a = np.array(lo, dtype=float, copy=True)
    b = np.array(hi, dtype=float, copy=True)
    rows = np.arange(a.size)
    x_best = a.copy()
    f_best = np.full(a.shape, np.inf)
    t = np.linspace(0.0, 1.0, points)
    for _ in range(max_rounds):
        xs = a[:, None] + (b - a)[:, None] * t[None, :]
        fs = np.asarray(f_mat(xs), dtype=float)
        fs = np.where(np.isnan(fs), np.inf, fs)
        j = np.argmin(fs, axis=1)
        fj = fs[rows, j]
        better = fj <= f_best
        x_best = np.where(better, xs[rows, j], x_best)
        f_best = np.where(better, fj, f_best)
        a = xs[rows, np.maximum(j - 1, 0)]
        b = xs[rows, np.minimum(j + 1, points - 1)]
        if np.all(b - a <= np.maximum(rtol * np.maximum(np.abs(a), np.abs(b)), atol)):
            return x_best, f_best
    raise NonConvergenceError("row-wise zoom search did not converge")
