import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hopcap.errors import DomainError
from hopcap.functional import (Branch, ModelParams, a_star, big_d, big_d1, c_star, c_star_prime,
                               f0, f0_array, f0_d, f1_d, fd_array)
from hopcap.specfun import log_gauss_tail, mills_a

mp.mp.dps = 40


def mp_logh(x):
    return mp.log(mp.erfc(mp.mpf(x) / mp.sqrt(2)) / 2)


def mp_a(x):
    x = mp.mpf(x)
    return mp.exp(-x * x / 2) / mp.sqrt(2 * mp.pi) / (mp.erfc(x / mp.sqrt(2)) / 2)


def mp_f0(u, v, alpha, delta, q=0.0, qp=0.0):
    u, v = mp.mpf(u), mp.mpf(v)
    a1 = mp.mpf(alpha) + 1 - 2 * mp.mpf(delta) + q
    a2 = mp.mpf(alpha) - 1 + 2 * mp.mpf(delta) + qp
    return (delta * mp_logh(a1 / u - v) + (1 - mp.mpf(delta)) * mp_logh(a2 / u - v)
            - u * v + v * v / 2 + alpha * mp.log(u))


def random_region_points(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.uniform(0.071, 0.1133, n)
    d = rng.uniform(0.0035, 0.00778, n)
    q = rng.uniform(0.0, 0.13, n)
    u = rng.uniform(0.25, 0.41, n)
    v = rng.uniform(-3.0, 3.0, n)
    return a, d, q, u, v


# ---------------------------------------------------------------- parameters

def test_a_star_examples():
    assert a_star(ModelParams(0.113, 0.00645)) == pytest.approx((1.10010, -0.87410), abs=1e-14)
    p = ModelParams.symmetric(0.113, 0.00645, 0.13)
    assert a_star(p) == pytest.approx((1.23010, -1.00410), abs=1e-14)
    # zero load is excluded from the parameter record; the affine map tends to (1, -1)
    assert a_star(ModelParams(1e-300, 0.0)) == pytest.approx((1.0, -1.0), abs=1e-15)


def test_params_validation():
    with pytest.raises(DomainError):
        ModelParams(0.0, 0.1)
    with pytest.raises(DomainError):
        ModelParams(-1.0, 0.1)
    with pytest.raises(DomainError):
        ModelParams(0.1, 1.2)
    with pytest.raises(DomainError):
        ModelParams(0.1, 0.01, delta1=0.02)
    with pytest.raises(DomainError):
        ModelParams(0.1, 0.01, q=math.nan)
    with pytest.raises(DomainError):
        ModelParams(0.1, 0.01, q_prime=math.inf)
    ModelParams(0.1, 0.01, q_prime=-math.inf)


def test_region_flag():
    ModelParams.symmetric(0.1, 0.005, 0.1, region_check=True)
    with pytest.raises(DomainError):
        ModelParams(0.3, 0.005, region_check=True)
    # legitimate far outside the region without the flag
    ModelParams(0.3, 0.005)


def test_region_bands_hold_on_region():
    a, d, q, _, _ = random_region_points(200, 1)
    for ai, di, qi in zip(a, d, q):
        ModelParams.symmetric(float(ai), float(di), float(qi), region_check=True)


# ---------------------------------------------------------------- F0

def test_f0_examples():
    p = ModelParams(0.1, 0.0)
    assert f0(1.0, 0.0, p) == pytest.approx(math.log(0.8159398746532405), rel=1e-13)
    assert f0(1.0, 0.0, p) == pytest.approx(-0.20341, abs=1e-5)
    p = ModelParams(0.04, 0.0)
    ref = float(mp_f0(0.2, 0.2, 0.04, 0.0))
    assert f0(0.2, 0.2, p) == pytest.approx(ref, rel=1e-13)


def test_f0_delta_one_uses_first_block():
    p = ModelParams(0.1, 1.0)
    a1, _ = a_star(p)
    u, v = 0.7, 0.3
    expect = log_gauss_tail(a1 / u - v) - u * v + v * v / 2 + 0.1 * math.log(u)
    assert f0(u, v, p) == pytest.approx(expect, rel=1e-15)


@given(st.floats(0.05, 3.0), st.floats(-5.0, 5.0), st.floats(0.01, 0.2), st.floats(0.0, 0.49),
       st.floats(-0.2, 0.2))
@settings(max_examples=150, deadline=None)
def test_f0_against_mpmath(u, v, alpha, delta, q):
    p = ModelParams(alpha, delta, q, -q)
    ref = float(mp_f0(u, v, alpha, delta, q, -q))
    assert f0(u, v, p) == pytest.approx(ref, rel=1e-11, abs=1e-12)


def test_f0_rejects_bad_u():
    with pytest.raises(DomainError):
        f0(0.0, 0.0, ModelParams(0.1, 0.01))
    with pytest.raises(DomainError):
        f0(-1.0, 0.0, ModelParams(0.1, 0.01))


def test_f0_minus_inf_qprime_drops_block():
    p = ModelParams(0.1, 0.01, 0.05, -math.inf)
    a1, _ = a_star(p)
    u, v = 0.4, 0.2
    expect = 0.01 * log_gauss_tail(a1 / u - v) - u * v + v * v / 2 + 0.1 * math.log(u)
    assert f0(u, v, p) == pytest.approx(expect, rel=1e-14)


def test_f0_monotone_in_q():
    qs = np.linspace(0, 0.13, 27)
    for u, v in [(0.3, 0.1), (0.4, -1.0), (0.25, 2.0)]:
        vals = [f0(u, v, ModelParams(0.1, 0.005, float(q))) for q in qs]
        assert np.all(np.diff(vals) <= 0)


def test_f0_convex_in_v_on_region():
    a, d, q, u, v = random_region_points(100, 2)
    h = 1e-4
    for ai, di, qi, ui, vi in zip(a, d, q, u, v):
        p = ModelParams.symmetric(ai, di, qi)
        fd = (f0(ui, vi + h, p) - 2 * f0(ui, vi, p) + f0(ui, vi - h, p)) / h**2
        a1, a2 = a_star(p)
        x1, x2 = a1 / ui - vi, a2 / ui - vi
        ap = lambda x: float(mp_a(x) * (mp_a(x) - x))
        exact = 1 - di * ap(x1) - (1 - di) * ap(x2)
        assert exact > 0
        assert fd == pytest.approx(exact, rel=1e-4, abs=1e-6)


# ---------------------------------------------------------------- D

def test_big_d_example():
    p = ModelParams(0.113, 0.0)
    a = float(mp_a(-0.887 / 0.4))
    assert mills_a(-2.2175) == pytest.approx(a, rel=1e-13)
    assert a == pytest.approx(0.0345894, rel=1e-5)
    assert big_d(0.4, 0.0, p) == pytest.approx(0.5 - a / 0.4, rel=1e-13)


def test_big_d_limits():
    p = ModelParams(0.113, 0.0)
    # A(a/u - v) vanishes as the argument goes to -inf, i.e. v -> +inf
    assert big_d(0.4, 40.0, p) == pytest.approx(0.5, abs=1e-12)
    assert big_d(0.4, -40.0, p) < -90
    p1 = ModelParams(0.113, 1.0)
    a1, _ = a_star(p1)
    u, v = 0.5, 0.1
    assert big_d(u, v, p1) == pytest.approx(0.5 - mills_a(a1 / u - v) / u, rel=1e-14)


def test_big_d_formula():
    rng = np.random.default_rng(3)
    for _ in range(50):
        al, de = rng.uniform(0.05, 0.15), rng.uniform(0.001, 0.4)
        q, qp = rng.uniform(-0.1, 0.1, 2)
        u, v = rng.uniform(0.1, 2.0), rng.uniform(-3, 3)
        p = ModelParams(al, de, q, qp)
        a1, a2 = a_star(p)
        A1, A2 = float(mp_a(a1 / u - v)) / u, float(mp_a(a2 / u - v)) / u
        ref = 0.5 - de * A1 - (1 - de) * A2 - 0.5 * de * (1 - de) * (A1 - A2) ** 2
        assert big_d(u, v, p) == pytest.approx(ref, rel=1e-11, abs=1e-13)


# ---------------------------------------------------------------- F0^D and F1^D

def test_f0_d_plain_branch_is_f0():
    rng = np.random.default_rng(4)
    hits = 0
    for _ in range(200):
        p = ModelParams(rng.uniform(0.05, 0.15), rng.uniform(0.0, 0.3))
        u, v = rng.uniform(0.2, 3.0), rng.uniform(-4, 1)
        fv = f0_d(u, v, p)
        if big_d(u, v, p) >= 0:
            hits += 1
            assert fv.branch is Branch.PLAIN and fv.value == f0(u, v, p)
    assert hits > 20


def test_f0_d_modified_example():
    p = ModelParams(0.113, 0.5)
    u, v = 0.1, 0.0
    fv = f0_d(u, v, p)
    d = big_d(u, v, p)
    assert d < 0 and fv.branch is Branch.MODIFIED and fv.d_value == d
    a1, a2 = a_star(p)
    logp = 0.5 * log_gauss_tail(a1 / u) + 0.5 * log_gauss_tail(a2 / u)
    quad = 0.113 * math.log(u)
    assert fv.value == pytest.approx(logp / (1 - 2 * d) + quad, rel=1e-14)
    assert fv.plain_value == pytest.approx(f0(u, v, p), rel=1e-15)
    # the log-H block is negative, so the rescaling raises the value
    assert fv.value >= fv.plain_value


def test_branch_iff_negative_d():
    rng = np.random.default_rng(5)
    for _ in range(300):
        p = ModelParams(rng.uniform(0.05, 0.15), rng.uniform(0.0, 0.5))
        fv = f0_d(rng.uniform(0.05, 2.0), rng.uniform(-3, 3), p)
        assert (fv.branch is Branch.MODIFIED) == (fv.d_value < 0)
        if fv.branch is Branch.MODIFIED:
            assert fv.value >= fv.plain_value


def test_f0_d_continuity_at_d_zero():
    p = ModelParams(0.113, 0.5)
    u = 0.4
    vs = np.linspace(-4, 2, 6001)
    _, d, _ = fd_array(u, vs, p)
    i = int(np.flatnonzero(np.diff(np.sign(d)) != 0)[0])
    lo, hi = vs[i], vs[i + 1]
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if (big_d(u, mid, p) < 0) == (big_d(u, lo, p) < 0):
            lo = mid
        else:
            hi = mid
    a, b = f0_d(u, lo, p), f0_d(u, hi, p)
    assert a.branch is not b.branch
    assert a.value == pytest.approx(b.value, abs=1e-12)


def test_f1_d_reduces_bitwise():
    rng = np.random.default_rng(6)
    for _ in range(1000):
        p = ModelParams(rng.uniform(0.05, 0.15), rng.uniform(0.0, 0.5), rng.uniform(-0.1, 0.1))
        u, v = rng.uniform(0.05, 2.0), rng.uniform(-3, 3)
        assert f1_d(u, v, p) == f0_d(u, v, p)


def test_f1_d_full_exclusion():
    p = ModelParams(0.1, 0.006, delta1=0.006)
    u, v = 0.35, 0.3
    _, a2 = a_star(p)
    x2 = a2 / u - v
    logp = (1 - 0.006) * log_gauss_tail(x2)
    quad = -u * v + v * v / 2 + 0.1 * math.log(u)
    fv = f1_d(u, v, p)
    assert fv.plain_value == pytest.approx(logp + quad, rel=1e-14)


def test_f1_d_recomposition():
    al, de, d1 = 0.1, 0.006, 0.003
    p = ModelParams(al, de, delta1=d1)
    u, v = 0.35, 0.3
    a1, a2 = al + 1 - 2 * de, al - 1 + 2 * de
    x1, x2 = a1 / u - v, a2 / u - v
    A1, A2 = float(mp_a(x1)) / u, float(mp_a(x2)) / u
    w1, w2 = de - d1, 1 - de
    d_ref = (0.5 - w1 * A1 - w2 * A2 - 0.5 * w1 * w2 * (A1 - A2) ** 2) / (1 - d1)
    logp = w1 * float(mp_logh(x1)) + w2 * float(mp_logh(x2))
    quad = -u * v + v * v / 2 + al * math.log(u)
    ref = logp / (1 - 2 * d_ref) + quad if d_ref < 0 else logp + quad
    fv = f1_d(u, v, p)
    assert fv.d_value == pytest.approx(d_ref, rel=1e-12)
    assert big_d1(u, v, p) == pytest.approx(d_ref, rel=1e-12)
    assert fv.value == pytest.approx(ref, rel=1e-12)


def test_arrays_match_scalars():
    p = ModelParams(0.1, 0.01, 0.02, -0.02)
    us = np.linspace(0.2, 1.0, 9)
    vs = np.linspace(-1, 1, 9)
    assert np.allclose(f0_array(us, vs, p), [f0(u, v, p) for u, v in zip(us, vs)], rtol=0, atol=0)


# ---------------------------------------------------------------- entropy

def test_c_star_examples():
    assert c_star(0.0) == 0.0
    assert c_star(0.5) == pytest.approx(math.log(2), rel=1e-15)
    d = mp.mpf("0.00777")
    ref = float(-d * mp.log(d) - (1 - d) * mp.log(1 - d))
    assert c_star(0.00777) == pytest.approx(ref, rel=1e-14)
    assert c_star(0.00777) == pytest.approx(0.0454824, rel=1e-6)


def test_c_star_domain():
    for bad in (-0.1, 1.0, 1.5):
        with pytest.raises(DomainError):
            c_star(bad)


def test_c_star_prime_fd():
    for d in (0.001, 0.00777, 0.2):
        h = 1e-7 * d
        fd = (c_star(d + h) - c_star(d - h)) / (2 * h)
        assert c_star_prime(d) == pytest.approx(fd, rel=1e-6)
