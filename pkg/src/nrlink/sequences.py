"""Bit-exact base sequence generators.

All binary sequences are numpy ``uint8`` arrays of 0/1. BPSK mapping
everywhere is ``b -> 1 - 2b``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import gcd

import numpy as np

from nrlink.errors import DomainError

NUM_PCI = 1008
PSS_SSS_LEN = 127
GOLD_NC = 1600


@dataclass(frozen=True)
class LfsrSpec:
    """Fibonacci LFSR ``x(i+degree) = XOR_{t in taps} x(i+t)``.

    ``init`` holds ``x(0) .. x(degree-1)``; the output stream starts at x(0).
    """

    degree: int
    taps: tuple[int, ...]
    init: tuple[int, ...]

    def __post_init__(self):
        if self.degree < 2:
            raise DomainError("LFSR degree must be >= 2")
        if not self.taps or any(not 0 <= t < self.degree for t in self.taps):
            raise DomainError(f"taps must lie in 0..{self.degree - 1}")
        if len(self.init) != self.degree or any(b not in (0, 1) for b in self.init):
            raise DomainError("init must hold `degree` bits")


@dataclass(frozen=True)
class CellId:
    pci: int

    def __post_init__(self):
        if not 0 <= self.pci < NUM_PCI:
            raise DomainError(f"PCI {self.pci} out of range 0..{NUM_PCI - 1}")

    @classmethod
    def from_parts(cls, nid1: int, nid2: int) -> CellId:
        if not 0 <= nid1 < 336 or not 0 <= nid2 < 3:
            raise DomainError(f"invalid (nid1, nid2) = {(nid1, nid2)}")
        return cls(3 * nid1 + nid2)

    @property
    def nid1(self) -> int:
        return self.pci // 3

    @property
    def nid2(self) -> int:
        return self.pci % 3


def _lfsr_run(init, taps, degree: int, n: int) -> np.ndarray:
    x = np.zeros(n + degree, dtype=np.uint8)
    x[:degree] = init
    # a block of (degree - max tap) outputs depends only on already-known bits
    step = degree - max(taps)
    i = 0
    while i < n:
        c = min(step, n - i)
        acc = x[i + taps[0]:i + taps[0] + c].copy()
        for t in taps[1:]:
            acc ^= x[i + t:i + t + c]
        x[i + degree:i + degree + c] = acc
        i += c
    return x[:n]


def m_sequence(spec: LfsrSpec, length: int) -> np.ndarray:
    if not any(spec.init):
        raise DomainError("an all-zero register never leaves the zero state")
    return _lfsr_run(np.array(spec.init, np.uint8), tuple(spec.taps), spec.degree, length)


_X1_INIT = (1,) + (0,) * 30
_X1_CACHE = np.zeros(0, dtype=np.uint8)


def _gold_x1(n: int) -> np.ndarray:
    global _X1_CACHE
    if _X1_CACHE.size < n:
        _X1_CACHE = _lfsr_run(np.array(_X1_INIT, np.uint8), (0, 3), 31, max(n, 2 * _X1_CACHE.size, 4096))
    return _X1_CACHE[:n]


def gold_constituents(c_init: int, length: int) -> tuple[np.ndarray, np.ndarray]:
    """The two degree-31 m-sequences behind :func:`gold_sequence`, after the
    1600-step fast-forward."""
    if not 0 <= c_init < 2**31:
        raise DomainError("c_init must be a 31-bit value")
    x1 = _gold_x1(GOLD_NC + length)[GOLD_NC:]
    init2 = np.array([(c_init >> i) & 1 for i in range(31)], dtype=np.uint8)
    x2 = _lfsr_run(init2, (0, 1, 2, 3), 31, GOLD_NC + length)[GOLD_NC:]
    return x1, x2


def gold_sequence(c_init: int, length: int) -> np.ndarray:
    if length < 1:
        raise DomainError("length must be >= 1")
    x1, x2 = gold_constituents(c_init, length)
    return x1 ^ x2


def bpsk(bits) -> np.ndarray:
    return 1.0 - 2.0 * np.asarray(bits, dtype=float)


def qpsk_gold(c_init: int, num_symbols: int) -> np.ndarray:
    """Unit-modulus QPSK symbols from consecutive Gold bit pairs."""
    c = gold_sequence(c_init, 2 * num_symbols).astype(float)
    return ((1 - 2 * c[0::2]) + 1j * (1 - 2 * c[1::2])) / np.sqrt(2)


def scramble(bits, c_init: int) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.uint8)
    return bits ^ gold_sequence(c_init, bits.size)


def descramble_llr(llr, c_init: int) -> np.ndarray:
    llr = np.asarray(llr, dtype=float)
    return llr * bpsk(gold_sequence(c_init, llr.size))


def zadoff_chu(u: int, n_zc: int, cyclic_shift: int = 0) -> np.ndarray:
    """``x[n] = exp(-j pi u n (n+1) / n_zc)`` read from offset ``cyclic_shift``."""
    if n_zc < 2 or gcd(u, n_zc) != 1:
        raise DomainError(f"root {u} is not coprime with length {n_zc}")
    if not 0 <= cyclic_shift < n_zc:
        raise DomainError(f"cyclic shift {cyclic_shift} out of range")
    n = (np.arange(n_zc, dtype=np.int64) + cyclic_shift) % n_zc
    # exact integer phase index keeps |x| == 1 and the zero-autocorrelation
    # property at machine precision
    ph = (u * n * (n + 1)) % (2 * n_zc)
    return np.exp(-1j * np.pi * ph / n_zc)


_PSS_SPEC = LfsrSpec(7, (0, 4), (0, 1, 1, 0, 1, 1, 1))
_SSS_X0 = LfsrSpec(7, (0, 4), (1, 0, 0, 0, 0, 0, 0))
_SSS_X1 = LfsrSpec(7, (0, 1), (1, 0, 0, 0, 0, 0, 0))


@lru_cache(maxsize=None)
def _pss_base() -> np.ndarray:
    return m_sequence(_PSS_SPEC, PSS_SSS_LEN)


def pss_sequence(nid2: int) -> np.ndarray:
    if nid2 not in (0, 1, 2):
        raise DomainError(f"nid2 must be 0, 1 or 2, got {nid2}")
    m = (np.arange(PSS_SSS_LEN) + 43 * nid2) % PSS_SSS_LEN
    return bpsk(_pss_base()[m])


@lru_cache(maxsize=None)
def _sss_bases() -> tuple[np.ndarray, np.ndarray]:
    return m_sequence(_SSS_X0, PSS_SSS_LEN), m_sequence(_SSS_X1, PSS_SSS_LEN)


def sss_sequence(cell: CellId | int) -> np.ndarray:
    if not isinstance(cell, CellId):
        cell = CellId(int(cell))
    x0, x1 = _sss_bases()
    m0 = 15 * (cell.nid1 // 112) + 5 * cell.nid2
    m1 = cell.nid1 % 112
    n = np.arange(PSS_SSS_LEN)
    return bpsk(x0[(n + m0) % PSS_SSS_LEN]) * bpsk(x1[(n + m1) % PSS_SSS_LEN])


@lru_cache(maxsize=None)
def sss_table() -> np.ndarray:
    """All 1008 SSS sequences, row index = PCI."""
    return np.stack([sss_sequence(CellId(p)) for p in range(NUM_PCI)])


def _largest_prime_below(m: int) -> int:
    for p in range(m - 1, 1, -1):
        if all(p % d for d in range(2, int(p**0.5) + 1)):
            return p
    raise DomainError(f"no prime below {m}")


def low_papr_sequence(group: int, length: int, base_index: int = 0, alpha: float = 0.0) -> np.ndarray:
    """Cyclically extended Zadoff-Chu base sequence for uplink reference signals.

    ``group`` selects one of 30 sequence groups, ``alpha`` applies a phase
    ramp ``exp(j alpha n)`` (the cyclic shift used for user multiplexing).
    """
    if length < 12 or length % 12:
        raise DomainError(f"length must be a positive multiple of 12, got {length}")
    if not 0 <= group < 30:
        raise DomainError("sequence group must be in 0..29")
    n_zc = _largest_prime_below(length)
    if length >= 36:
        q_bar = n_zc * (group + 1) / 31
        q = int(np.floor(q_bar + 0.5)) + base_index * (-1) ** int(np.floor(2 * q_bar))
    else:
        # the group formula degenerates to q = 0 for short lengths
        q = group % (n_zc - 1) + 1
    x = zadoff_chu(q % n_zc or 1, n_zc)
    r = x[np.arange(length) % n_zc]
    if alpha:
        r = r * np.exp(1j * alpha * np.arange(length))
    return r
