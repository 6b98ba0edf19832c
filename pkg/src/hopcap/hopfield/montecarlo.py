"""Seeded Monte Carlo estimators over independent pattern draws."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from ..errors import DomainError
from .dynamics import FixedPoint, classify, field_numerators, run_dynamics
from .patterns import SpinState, flip_config, flip_count, gen_patterns


@dataclass(frozen=True)
class McEstimate:
    successes: int
    trials: int
    p_hat: float
    ci_low: float
    ci_high: float
    seed: int
    marginal: int = 0
    n: int = 0
    p: int = 0
    alpha: float = math.nan
    alpha_emp: float = math.nan
    delta: float = math.nan
    flips: int = 0


@dataclass(frozen=True)
class RetrievalStats:
    mean_error: float
    se_error: float
    one_step_mean: float
    one_step_se: float
    trials: int
    nonconverged: int
    n: int
    p: int
    alpha: float
    alpha_emp: float
    seed: int
    mean_sweeps: float
    errors: tuple = ()
    one_step: tuple = ()


def wilson_interval(successes: int, trials: int, level: float = 0.95):
    """Wilson score interval for a binomial proportion."""
    if trials < 1 or not 0 <= successes <= trials:
        raise DomainError("need 0 <= successes <= trials and trials >= 1")
    z = NormalDist().inv_cdf(0.5 + level / 2)
    ph = successes / trials
    z2n = z * z / trials
    centre = (ph + z2n / 2) / (1 + z2n)
    half = z * math.sqrt(ph * (1 - ph) / trials + z2n / (4 * trials)) / (1 + z2n)
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == trials else min(1.0, centre + half)
    return min(lo, ph), max(hi, ph)


def n_patterns(n: int, alpha: float) -> int:
    p = int(round(alpha * n))
    if p < 1:
        raise DomainError(f"round(alpha*n) = {p}; need at least one pattern")
    return p


def _run_trials(task, args_list, workers):
    if workers and workers > 1 and len(args_list) > 1:
        size = -(-len(args_list) // workers)
        chunks = [args_list[i:i + size] for i in range(0, len(args_list), size)]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_chunk, [(task, c) for c in chunks]))
        return [r for part in parts for r in part]
    return [task(a) for a in args_list]


def _chunk(arg):
    task, items = arg
    return [task(a) for a in items]


def _fixed_trial(args):
    n, p, delta, seed, t = args
    ps = gen_patterns(n, p, seed, stream=t)
    s = flip_config(ps, 0, delta)
    return classify(field_numerators(ps, s)).value


def mc_fixed_probability(n: int, alpha: float, delta: float, trials: int, seed: int,
                         *, workers: int = 1) -> McEstimate:
    """Fraction of pattern draws for which the flipped configuration is a strict fixed point.

    Trial t uses the pattern stream (seed, t); Marginal outcomes count as failures.
    """
    if trials < 1:
        raise DomainError("trials must be >= 1")
    p = n_patterns(n, alpha)
    out = _run_trials(_fixed_trial, [(n, p, delta, seed, t) for t in range(trials)], workers)
    succ = sum(1 for r in out if r == FixedPoint.STABLE.value)
    marg = sum(1 for r in out if r == FixedPoint.MARGINAL.value)
    lo, hi = wilson_interval(succ, trials)
    return McEstimate(succ, trials, succ / trials, lo, hi, seed, marg, n, p, alpha, p / n, delta,
                      flip_count(n, delta))


def _retrieval_trial(args):
    n, p, seed, t, max_sweeps = args
    ps = gen_patterns(n, p, seed, stream=t)
    s0 = SpinState.from_words(ps, ps.words[0].copy())
    one_step = float(np.count_nonzero(field_numerators(ps, s0) < 0)) / n
    res = run_dynamics(ps, s0, max_sweeps)
    err = res.state.hamming(ps.words[0]) / n
    return err, one_step, res.converged, res.sweeps


def retrieval_error(n: int, alpha: float, trials: int, seed: int, *, max_sweeps: int = 100,
                    workers: int = 1) -> RetrievalStats:
    """Dynamics started at pattern 0: final relative Hamming error and one-step error rate.

    Means and standard errors of the final error use converged trials only.
    """
    if trials < 1:
        raise DomainError("trials must be >= 1")
    p = n_patterns(n, alpha)
    out = _run_trials(_retrieval_trial, [(n, p, seed, t, max_sweeps) for t in range(trials)],
                      workers)
    errs = np.array([o[0] for o in out])
    one = np.array([o[1] for o in out])
    conv = np.array([o[2] for o in out])

    def mean_se(x):
        if len(x) == 0:
            return math.nan, math.nan
        se = float(np.std(x, ddof=1) / math.sqrt(len(x))) if len(x) > 1 else math.nan
        return float(np.mean(x)), se

    me, se = mean_se(errs[conv])
    mo, so = mean_se(one)
    return RetrievalStats(me, se, mo, so, trials, int((~conv).sum()), n, p, alpha, p / n, seed,
                          float(np.mean([o[3] for o in out])), tuple(float(e) for e in errs),
                          tuple(float(o) for o in one))
