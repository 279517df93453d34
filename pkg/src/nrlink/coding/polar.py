"""CRC-aided polar codes for control payloads.

Construction follows the NR conventions: information bits sit on the most
reliable synthetic channels of a fixed reliability sequence
(``data/polar_reliability.txt``), the transform is ``u F^{(x)n}``, and rate
matching uses the 32-way sub-block interleaver with repetition,
puncturing or shortening. No CRC interleaving or parity-check bits are
applied.

Decoding is successive-cancellation list decoding, vectorized over a
batch of codewords.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

from nrlink.coding.crc import BY_LENGTH, crc_attach, crc_check_batch
from nrlink.errors import DomainError

SUBBLOCK_PATTERN = np.array([
    0, 1, 2, 4, 3, 5, 6, 7, 8, 16, 9, 17, 10, 18, 11, 19,
    12, 20, 13, 21, 14, 22, 15, 23, 24, 25, 26, 28, 27, 29, 30, 31,
])

N_MAX_DL = 9
N_MIN = 5


@lru_cache(maxsize=None)
def reliability_sequence() -> np.ndarray:
    text = resources.files("nrlink").joinpath("data/polar_reliability.txt").read_text()
    return np.array([int(ln) for ln in text.splitlines() if ln and not ln.startswith("#")])


def mother_code_length(k: int, e: int, n_max: int = N_MAX_DL) -> int:
    n1 = math.ceil(math.log2(e))
    if e <= (9 / 8) * 2 ** (n1 - 1) and k / e < 9 / 16:
        n1 -= 1
    n2 = math.ceil(math.log2(8 * k))
    return 2 ** max(min(n1, n2, n_max), N_MIN)


@dataclass(frozen=True)
class PolarSpec:
    """``coded_len`` is the rate-matched length E; the mother length N is
    derived from (K, E). Set ``mother_len`` to force N (then E may equal N)."""

    payload_len: int
    coded_len: int
    crc_len: int = 24
    list_size: int = 8
    mother_len: int | None = None

    def __post_init__(self):
        if self.payload_len < 1:
            raise DomainError("payload must be non-empty")
        if self.crc_len not in BY_LENGTH:
            raise DomainError(f"unsupported CRC length {self.crc_len}")
        n = self.n
        if n & (n - 1):
            raise DomainError("mother code length must be a power of two")
        if self.k > min(n, self.coded_len):
            raise DomainError(
                f"payload {self.payload_len} + CRC {self.crc_len} does not fit {self.coded_len} coded bits"
            )
        if self.list_size < 1:
            raise DomainError("list size must be >= 1")

    @property
    def k(self) -> int:
        return self.payload_len + self.crc_len

    @property
    def n(self) -> int:
        return self.mother_len or mother_code_length(self.k, self.coded_len)

    @property
    def crc_id(self) -> str:
        return BY_LENGTH[self.crc_len]


def subblock_interleaver(n: int) -> np.ndarray:
    """Index map J: output position i takes input bit J[i]."""
    i = np.arange(n)
    return SUBBLOCK_PATTERN[(32 * i) // n] * (n // 32) + i % (n // 32)


@lru_cache(maxsize=256)
def _construction(k: int, e: int, n: int):
    """Information set (sorted) and the rate-matching mode."""
    q = reliability_sequence()
    q = q[q < n]
    jmap = subblock_interleaver(n)
    frozen_extra = set()
    if e < n:
        if k / e <= 7 / 16:
            mode = "puncture"
            frozen_extra.update(int(j) for j in jmap[:n - e])
            if e >= 3 * n / 4:
                frozen_extra.update(range(math.ceil(3 * n / 4 - e / 2)))
            else:
                frozen_extra.update(range(math.ceil(9 * n / 16 - e / 4)))
        else:
            mode = "shorten"
            frozen_extra.update(int(j) for j in jmap[e:])
    else:
        mode = "repeat"
    candidates = [int(i) for i in q if int(i) not in frozen_extra]
    if len(candidates) < k:
        raise DomainError("not enough reliable channels for the payload")
    info = np.sort(np.array(candidates[-k:]))
    return info, mode


def polar_transform(u: np.ndarray) -> np.ndarray:
    """``x = u F^{(x)n}`` over GF(2), along the last axis."""
    x = np.array(u, dtype=np.uint8, copy=True)
    n = x.shape[-1]
    lead = x.shape[:-1]
    step = 1
    while step < n:
        x = x.reshape(*lead, n // (2 * step), 2, step)
        x[..., 0, :] ^= x[..., 1, :]
        x = x.reshape(*lead, n)
        step *= 2
    return x


def _rate_match(y: np.ndarray, e: int, mode: str) -> np.ndarray:
    n = y.shape[-1]
    if mode == "repeat":
        return y[..., np.arange(e) % n]
    if mode == "puncture":
        return y[..., n - e:]
    return y[..., :e]


def polar_encode(payload, spec: PolarSpec, crc_mask=None) -> np.ndarray:
    """Attach CRC (optionally XOR-masking its trailing bits), place on the
    information set, transform and rate-match to ``spec.coded_len`` bits."""
    payload = np.asarray(payload, dtype=np.uint8)
    if payload.shape[-1] != spec.payload_len:
        raise DomainError(f"payload length {payload.shape[-1]} != {spec.payload_len}")
    lead = payload.shape[:-1]
    flat = payload.reshape(-1, spec.payload_len)
    words = np.stack([crc_attach(p, spec.crc_id) for p in flat])
    if crc_mask is not None:
        mask = np.asarray(crc_mask, dtype=np.uint8)
        words[:, -mask.size:] ^= mask
    info, mode = _construction(spec.k, spec.coded_len, spec.n)
    u = np.zeros((flat.shape[0], spec.n), dtype=np.uint8)
    u[:, info] = words
    y = polar_transform(u)[:, subblock_interleaver(spec.n)]
    out = _rate_match(y, spec.coded_len, mode)
    return out.reshape(*lead, spec.coded_len)


def _rate_recover(llr: np.ndarray, n: int, mode: str) -> np.ndarray:
    batch, e = llr.shape
    y = np.zeros((batch, n))
    if mode == "repeat":
        np.add.at(y, (slice(None), np.arange(e) % n), llr)
    elif mode == "puncture":
        y[:, n - e:] = llr
    else:
        y[:, :e] = llr
        y[:, e:] = 1e4  # shortened bits are known zeros
    out = np.empty_like(y)
    out[:, subblock_interleaver(n)] = y
    return out


def _f(a, b):
    return np.sign(a) * np.sign(b) * np.minimum(np.abs(a), np.abs(b))


def scl_decode(llr: np.ndarray, info: np.ndarray, list_size: int):
    """Successive-cancellation list decoding of mother-code LLRs.

    ``llr`` is ``(batch, N)``. Returns ``(u_hat, metric)`` with ``u_hat`` of
    shape ``(batch, L, N)`` ordered best path first.
    """
    batch, n = llr.shape
    m = int(math.log2(n))
    big_l = list_size
    is_info = np.zeros(n, dtype=bool)
    is_info[info] = True
    # alpha[s] holds LLRs for the current node at depth with 2**s leaves
    alpha = [np.zeros((batch, big_l, 2**s)) for s in range(m)]
    alpha.append(np.broadcast_to(llr[:, None, :], (batch, big_l, n)))
    # beta[s]: re-encoded bits of the most recent left child of size 2**s
    beta = [np.zeros((batch, big_l, 2**s), dtype=np.uint8) for s in range(m + 1)]
    u = np.zeros((batch, big_l, n), dtype=np.uint8)
    pm = np.full((batch, big_l), np.inf)
    pm[:, 0] = 0.0
    rows = np.arange(batch)[:, None]
    for phi in range(n):
        top = m - 1 if phi == 0 else (phi & -phi).bit_length() - 1
        for s in range(min(top, m - 1), -1, -1):
            parent = alpha[s + 1]
            half = 2**s
            a, b = parent[..., :half], parent[..., half:]
            if (phi >> s) & 1:
                alpha[s] = b + (1 - 2 * beta[s].astype(float)) * a
            else:
                alpha[s] = _f(a, b)
        leaf = alpha[0][..., 0]
        if is_info[phi]:
            cand = np.stack([pm + np.where(leaf < 0, np.abs(leaf), 0.0),
                             pm + np.where(leaf >= 0, np.abs(leaf), 0.0)], axis=-1)
            flat = cand.reshape(batch, 2 * big_l)
            keep = np.argsort(flat, axis=1, kind="stable")[:, :big_l]
            parent_idx = keep // 2
            bit = (keep % 2).astype(np.uint8)
            pm = np.take_along_axis(flat, keep, axis=1)
            for s in range(m):
                alpha[s] = alpha[s][rows, parent_idx]
                beta[s] = beta[s][rows, parent_idx]
            u = u[rows, parent_idx]
        else:
            bit = np.zeros((batch, big_l), dtype=np.uint8)
            pm = pm + np.where(leaf < 0, np.abs(leaf), 0.0)
        u[..., phi] = bit
        # propagate partial sums up while the finished node is a right child
        v = bit[..., None]
        s = 0
        while (phi >> s) & 1:
            v = np.concatenate([beta[s] ^ v, v], axis=-1)
            s += 1
        if s < m:
            beta[s] = v
    order = np.argsort(pm, axis=1, kind="stable")
    return u[rows, order], np.take_along_axis(pm, order, axis=1)


def polar_decode(llr, spec: PolarSpec, crc_mask=None):
    """Decode rate-matched LLRs (positive favors 0).

    Returns ``(payloads, ok)``; ``payloads`` has shape ``(..., payload_len)``
    and ``ok`` marks words where some list path passed the CRC. The first
    passing path in metric order is returned.
    """
    llr = np.asarray(llr, dtype=float)
    lead = llr.shape[:-1]
    flat = llr.reshape(-1, spec.coded_len)
    info, mode = _construction(spec.k, spec.coded_len, spec.n)
    y = _rate_recover(flat, spec.n, mode)
    u, _ = scl_decode(y, info, spec.list_size)
    words = u[..., info]
    if crc_mask is not None:
        mask = np.asarray(crc_mask, dtype=np.uint8)
        words[..., -mask.size:] ^= mask
    passed = crc_check_batch(words, spec.crc_id)
    ok = passed.any(axis=1)
    best = np.argmax(passed, axis=1)
    chosen = words[np.arange(words.shape[0]), best, :spec.payload_len]
    return chosen.reshape(*lead, spec.payload_len), ok.reshape(lead)
