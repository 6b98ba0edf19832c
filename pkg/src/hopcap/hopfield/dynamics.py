"""Fields, energy, fixed-point and shell predicates, zero-temperature dynamics.

Internally everything is kept in integer units of 1/N: the field numerator
N z_k = sigma_k (Xi^T m)_k - p and 2N H = p N - sum_mu (m^mu)^2.
"""
from __future__ import annotations

from enum import Enum
from typing import NamedTuple

import numpy as np

from ..errors import DomainError, PreconditionError
from .patterns import WORD_BITS, PatternSet, SpinState, popcount_rows


class FixedPoint(str, Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"
    MARGINAL = "Marginal"


def _check(ps: PatternSet, s: SpinState):
    if s.n != ps.n or s.overlaps.shape != (ps.p,):
        raise PreconditionError("spin state does not match the pattern set")


def local_field_numerators(ps: PatternSet, s: SpinState) -> np.ndarray:
    """(Xi^T m)_k, the raw local field times N including the diagonal."""
    _check(ps, s)
    return ps.project(s.overlaps)


def field_numerators(ps: PatternSet, s: SpinState) -> np.ndarray:
    """N z_k as exact integers."""
    return s.spins().astype(np.int64) * local_field_numerators(ps, s) - ps.p


def effective_fields(ps: PatternSet, s: SpinState) -> np.ndarray:
    """z_k = sigma_k (1/N) sum_{j != k} sum_mu xi^mu_k xi^mu_j sigma_j."""
    return field_numerators(ps, s) / ps.n


def tilde_fields(ps: PatternSet, s: SpinState, pattern_index: int) -> np.ndarray:
    """sigma_k (1/N) sum over patterns other than ``pattern_index`` of xi_k m, diagonal kept."""
    _check(ps, s)
    if not 0 <= pattern_index < ps.p:
        raise PreconditionError(f"pattern index {pattern_index} out of range")
    h = local_field_numerators(ps, s)
    xi = ps.pattern(pattern_index).astype(np.int64)
    num = s.spins().astype(np.int64) * (h - xi * int(s.overlaps[pattern_index]))
    return num / ps.n


def energy_numerator(ps: PatternSet, s: SpinState) -> int:
    """2N H(sigma) as an exact integer."""
    _check(ps, s)
    m = s.overlaps.astype(np.int64)
    return int(ps.p * ps.n - int(np.dot(m, m)))


def energy(ps: PatternSet, s: SpinState) -> float:
    """H = -(1/2N) sum_mu (m^mu)^2 + p/2."""
    return energy_numerator(ps, s) / (2 * ps.n)


def classify(znum: np.ndarray) -> FixedPoint:
    lo = int(np.min(znum))
    if lo > 0:
        return FixedPoint.STABLE
    return FixedPoint.MARGINAL if lo == 0 else FixedPoint.UNSTABLE


def is_fixed_point(ps: PatternSet, s: SpinState) -> FixedPoint:
    return classify(field_numerators(ps, s))


def _flipped_sites(ps, s, pattern_index, flipped):
    if not 0 <= pattern_index < ps.p:
        raise PreconditionError(f"pattern index {pattern_index} out of range")
    diff = (s.spins() != ps.pattern(pattern_index))
    if flipped is not None and int(diff.sum()) != flipped:
        raise PreconditionError(f"state is at Hamming distance {int(diff.sum())}, not {flipped}")
    return diff


def is_shell_local_min(ps: PatternSet, s: SpinState, pattern_index: int,
                       flipped: int | None = None) -> bool:
    """No swap (restore a flipped site, flip an unflipped one) lowers the energy.

    Condition per pair: N z_k + N z_j - 2 C_kj sigma_k sigma_j >= 0 with C = N J.
    Only pairs whose field sum is below 2p can violate it; those are enumerated.
    """
    _check(ps, s)
    in_f = _flipped_sites(ps, s, pattern_index, flipped)
    z = field_numerators(ps, s)
    f_idx = np.flatnonzero(in_f)
    u_idx = np.flatnonzero(~in_f)
    if len(f_idx) == 0 or len(u_idx) == 0:
        rest = u_idx if len(f_idx) == 0 else f_idx
        return bool(np.all(z[rest] >= 0))
    p = ps.p
    zf, zu = z[f_idx], z[u_idx]
    if int(zf.min()) + int(zu.min()) - 2 * p >= 0:
        return True
    if int(zf.min()) + int(zu.min()) + 2 * p < 0:
        return False
    order = np.argsort(zu, kind="stable")
    zu_sorted, u_sorted = zu[order], u_idx[order]
    sig = s.spins().astype(np.int64)
    for k, zk in zip(f_idx, zf):
        # candidates j with z_k + z_j < 2p
        cut = np.searchsorted(zu_sorted, 2 * p - int(zk), side="left")
        if cut == 0:
            continue
        js = u_sorted[:cut]
        c = ps.couplings_row(int(k), js)
        if np.any(zk + zu_sorted[:cut] - 2 * c * sig[k] * sig[js] < 0):
            return False
    return True


class DynamicsResult(NamedTuple):
    state: SpinState
    sweeps: int
    converged: bool
    energy_trace: tuple | None = None


def _flip_inplace(ps, s, k, h, sig_k):
    """Flip site k, update overlaps and every raw field numerator."""
    s.words[k // WORD_BITS] ^= np.uint64(1 << (k % WORD_BITS))
    xi_k = ps.site_words[k]
    # m^mu changes by -2 sigma_k xi^mu_k
    xi_signs = 1 - 2 * ((ps.words[:, k // WORD_BITS] >> np.uint64(k % WORD_BITS)) & np.uint64(1)).astype(np.int64)
    s.overlaps -= 2 * sig_k * xi_signs
    c = ps.p - 2 * popcount_rows(ps.site_words ^ xi_k)
    h -= 2 * sig_k * c


def run_dynamics(ps: PatternSet, s0: SpinState, max_sweeps: int = 100, *,
                 record_energy: bool = False, debug: bool = False) -> DynamicsResult:
    """Sequential updates in index order; a site flips iff its field is strictly negative."""
    _check(ps, s0)
    if max_sweeps < 1:
        raise DomainError("max_sweeps must be >= 1")
    s = s0.copy()
    h = local_field_numerators(ps, s)
    sig = s.spins().astype(np.int64)
    e_num = energy_numerator(ps, s) if (record_energy or debug) else 0
    trace = [e_num] if record_energy else None
    n, p = ps.n, ps.p
    for sweep in range(1, max_sweeps + 1):
        flips = 0
        pos = 0
        while pos < n:
            z = sig[pos:] * h[pos:] - p
            hits = np.flatnonzero(z < 0)
            if len(hits) == 0:
                break
            k = pos + int(hits[0])
            zk = int(z[hits[0]])
            _flip_inplace(ps, s, k, h, int(sig[k]))
            sig[k] = -sig[k]
            flips += 1
            if record_energy or debug:
                new_e = e_num + 4 * zk
                if debug:
                    assert new_e == energy_numerator(ps, s) and new_e < e_num
                e_num = new_e
                if record_energy:
                    trace.append(e_num)
            pos = k + 1
        if flips == 0:
            return DynamicsResult(s, sweep, True, tuple(trace) if record_energy else None)
    return DynamicsResult(s, max_sweeps, False, tuple(trace) if record_energy else None)


class ProbeResult(NamedTuple):
    state: SpinState
    energy_drop: float


def descent_probe(ps: PatternSet, s: SpinState, pattern_index: int, eps: float) -> ProbeResult:
    """Flip the first [eps N] + 1 flipped-block sites whose field is <= -(1/2 + alpha) eps.

    Fires only when more than eps N such sites exist; otherwise returns s with drop 0.
    """
    _check(ps, s)
    if not eps > 0:
        raise PreconditionError("eps must be positive")
    in_f = _flipped_sites(ps, s, pattern_index, None)
    z = effective_fields(ps, s)
    alpha = ps.p / ps.n
    cand = np.flatnonzero(in_f & (z <= -(0.5 + alpha) * eps))
    need = int(np.floor(eps * ps.n + 1e-9)) + 1
    if len(cand) <= eps * ps.n:
        return ProbeResult(s.copy(), 0.0)
    spins = s.spins()
    spins[cand[:need]] *= -1
    new = SpinState.from_spins(ps, spins)
    drop = (energy_numerator(ps, s) - energy_numerator(ps, new)) / (2 * ps.n)
    return ProbeResult(new, drop)
