"""Bit-packed pattern sets and spin states.

Encoding: bit 0 is +1, bit 1 is -1, so XOR of two words marks the sites where the
product of spins is -1 and overlaps reduce to popcounts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ..errors import DomainError, PreconditionError, ResourceError

WORD_BITS = 64
WORD_DTYPE = np.dtype("<u8")
# packed p*n bits allowed per pattern set (the site-major copy doubles it)
DEFAULT_MAX_BITS = 1 << 33
_CHUNK_SITES = 4096


def n_words(n: int) -> int:
    return (n + WORD_BITS - 1) // WORD_BITS


def _tail_mask(n: int) -> np.uint64:
    r = n % WORD_BITS
    return np.uint64((1 << r) - 1) if r else np.uint64(0xFFFFFFFFFFFFFFFF)


def pack_signs(signs: np.ndarray) -> np.ndarray:
    """Pack a (..., n) array of +-1 into (..., n_words) little-endian uint64 words."""
    s = np.asarray(signs)
    n = s.shape[-1]
    bits = (s < 0).astype(np.uint8)
    pad = n_words(n) * WORD_BITS - n
    if pad:
        bits = np.concatenate([bits, np.zeros(s.shape[:-1] + (pad,), np.uint8)], axis=-1)
    packed = np.packbits(bits, axis=-1, bitorder="little")
    return np.ascontiguousarray(packed).view(WORD_DTYPE)


def unpack_signs(words: np.ndarray, n: int, dtype=np.int8) -> np.ndarray:
    """Inverse of ``pack_signs``: (..., n_words) words to (..., n) array of +-1."""
    w = np.ascontiguousarray(words, dtype=WORD_DTYPE)
    bits = np.unpackbits(w.view(np.uint8), axis=-1, count=n, bitorder="little")
    return (1 - 2 * bits.astype(np.int16)).astype(dtype)


def popcount_rows(words: np.ndarray) -> np.ndarray:
    return np.bitwise_count(words).sum(axis=-1, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class PatternSet:
    """p stored +-1 patterns of length n, pattern-major and bit-packed."""

    n: int
    p: int
    seed: int
    stream: int
    words: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.words.shape != (self.p, n_words(self.n)) or self.words.dtype != WORD_DTYPE:
            raise DomainError("packed pattern matrix has inconsistent shape or dtype")

    @property
    def alpha(self) -> float:
        return self.p / self.n

    def pattern(self, mu: int) -> np.ndarray:
        if not 0 <= mu < self.p:
            raise PreconditionError(f"pattern index {mu} out of range [0, {self.p})")
        return unpack_signs(self.words[mu], self.n)

    def dense(self, rows=slice(None), dtype=np.int8) -> np.ndarray:
        return unpack_signs(self.words[rows], self.n, dtype)

    @cached_property
    def site_words(self) -> np.ndarray:
        """Site-major copy: row k packs (xi^1_k, ..., xi^p_k)."""
        out = np.empty((self.n, n_words(self.p)), WORD_DTYPE)
        wchunk = _CHUNK_SITES // WORD_BITS
        for w0 in range(0, self.words.shape[1], wchunk):
            s0 = w0 * WORD_BITS
            s1 = min(self.n, s0 + _CHUNK_SITES)
            block = unpack_signs(self.words[:, w0:w0 + wchunk], s1 - s0)
            out[s0:s1] = pack_signs(block.T)
        return out

    def couplings_row(self, k: int, sites=None) -> np.ndarray:
        """Integer couplings C_kj = sum_mu xi^mu_k xi^mu_j = N J_kj (diagonal C_kk = p)."""
        sw = self.site_words
        other = sw if sites is None else sw[np.asarray(sites)]
        return self.p - 2 * popcount_rows(other ^ sw[k])

    def project(self, m: np.ndarray) -> np.ndarray:
        """sum_mu xi^mu_k m^mu for every site k, exact in int64."""
        m = np.asarray(m)
        out = np.zeros(self.n, dtype=np.float64)
        # float64 sums of integers stay exact below 2^53
        rows = max(1, (1 << 23) // max(self.n, 1))
        for r0 in range(0, self.p, rows):
            block = self.dense(slice(r0, r0 + rows), dtype=np.float64)
            out += m[r0:r0 + rows].astype(np.float64) @ block
        return np.rint(out).astype(np.int64)


def _check_seed(seed, name="seed"):
    if not isinstance(seed, (int, np.integer)) or not 0 <= int(seed) < 2 ** 64:
        raise DomainError(f"{name} must be an integer in [0, 2^64)")
    return int(seed)


def gen_patterns(n: int, p: int, seed: int, stream: int = 0,
                 max_bits: int = DEFAULT_MAX_BITS) -> PatternSet:
    """i.i.d. fair +-1 patterns from Philox keyed by (seed, stream).

    Pattern mu occupies its own run of Philox counter blocks, so entries are a
    function of (seed, stream, mu, block) only.
    """
    if not (isinstance(n, (int, np.integer)) and n >= 2):
        raise DomainError("n must be an integer >= 2")
    if not (isinstance(p, (int, np.integer)) and p >= 1):
        raise DomainError("p must be an integer >= 1")
    seed = _check_seed(seed)
    stream = _check_seed(stream, "stream")
    if n * p > max_bits:
        raise ResourceError(f"n*p = {n * p} bits exceeds the cap of {max_bits}")
    w = n_words(n)
    blocks = (w + 3) // 4  # Philox4x64 emits four words per counter value
    bitgen = np.random.Philox(key=(stream << 64) | seed)
    raw = bitgen.random_raw(p * blocks * 4).reshape(p, blocks * 4)[:, :w]
    words = np.ascontiguousarray(raw, dtype=WORD_DTYPE)
    words[:, -1] &= _tail_mask(n)
    return PatternSet(int(n), int(p), seed, stream, words)


def pattern_set_from_signs(signs, seed: int = 0) -> PatternSet:
    """Wrap an explicit (p, n) +-1 matrix, mainly for tests and tiny examples."""
    s = np.atleast_2d(np.asarray(signs))
    if not np.all(np.abs(s) == 1):
        raise DomainError("pattern entries must be +-1")
    p, n = s.shape
    return PatternSet(n, p, seed, 0, pack_signs(s))


@dataclass(eq=False)
class SpinState:
    """Packed spins plus the integer overlaps m^mu = sum_j xi^mu_j sigma_j."""

    n: int
    words: np.ndarray = field(repr=False)
    overlaps: np.ndarray = field(repr=False)

    @classmethod
    def from_spins(cls, ps: PatternSet, spins) -> "SpinState":
        spins = np.asarray(spins)
        if spins.shape != (ps.n,) or not np.all(np.abs(spins) == 1):
            raise PreconditionError("spins must be a length-n vector of +-1")
        words = pack_signs(spins)
        return cls(ps.n, words, overlaps_of(ps, words))

    @classmethod
    def from_words(cls, ps: PatternSet, words) -> "SpinState":
        words = np.array(words, dtype=WORD_DTYPE)
        return cls(ps.n, words, overlaps_of(ps, words))

    def spins(self) -> np.ndarray:
        return unpack_signs(self.words, self.n)

    def spin(self, k: int) -> int:
        return -1 if (int(self.words[k // WORD_BITS]) >> (k % WORD_BITS)) & 1 else 1

    def copy(self) -> "SpinState":
        return SpinState(self.n, self.words.copy(), self.overlaps.copy())

    def check(self, ps: PatternSet) -> bool:
        m = self.overlaps
        return (ps.n == self.n and np.array_equal(m, overlaps_of(ps, self.words))
                and bool(np.all(np.abs(m) <= self.n)) and bool(np.all((m - self.n) % 2 == 0)))

    def hamming(self, other_words) -> int:
        return int(popcount_rows(self.words ^ other_words))


def overlaps_of(ps: PatternSet, words) -> np.ndarray:
    """m^mu = n - 2 popcount(xi^mu XOR sigma)."""
    return ps.n - 2 * popcount_rows(ps.words ^ words[None, :])


def flip_count(n: int, delta: float) -> int:
    # [delta n] with a guard against products like 0.29 * 100 = 28.999999999999996
    return int(math.floor(delta * n + 1e-9))


def flip_config(ps: PatternSet, pattern_index: int, delta: float) -> SpinState:
    """sigma equal to -xi on sites 0 .. [delta n) - 1 and to xi elsewhere."""
    if not 0 <= pattern_index < ps.p:
        raise PreconditionError(f"pattern index {pattern_index} out of range [0, {ps.p})")
    if not 0 <= delta < 0.5:
        raise DomainError("delta must lie in [0, 1/2)")
    f = flip_count(ps.n, delta)
    words = ps.words[pattern_index].copy()
    full, rem = divmod(f, WORD_BITS)
    words[:full] ^= np.uint64(0xFFFFFFFFFFFFFFFF)
    if rem:
        words[full] ^= np.uint64((1 << rem) - 1)
    return SpinState.from_words(ps, words)
