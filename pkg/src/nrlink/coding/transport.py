"""Transport-block chain for the shared channels.

TB CRC -> base graph selection -> code-block segmentation (+ CB CRC) ->
LDPC encoding -> circular-buffer rate matching -> bit interleaving ->
code-block concatenation, and the matching receive path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from nrlink.coding.crc import crc_attach, crc_check
from nrlink.coding.ldpc import BaseGraphId, ldpc_code, min_lifting_size, select_base_graph
from nrlink.errors import DomainError

CB_CRC = "24B"
CB_CRC_LEN = 24
FILLER_LLR = 1e4

# redundancy-version start positions as fractions (numerator, denominator)
_K0 = {
    BaseGraphId.BG1: (0, 17, 33, 56),
    BaseGraphId.BG2: (0, 13, 25, 43),
}


@dataclass(frozen=True)
class TransportBlock:
    bits: np.ndarray

    @property
    def size_a(self) -> int:
        return int(self.bits.size)


@dataclass
class CodeBlock:
    """One LDPC code block: ``k_prime`` data+CRC bits followed by filler zeros."""

    bits: np.ndarray
    k_prime: int
    lifting_size: int
    bg: BaseGraphId
    has_crc: bool

    @property
    def k(self) -> int:
        return self.bits.size

    @property
    def num_filler(self) -> int:
        return self.k - self.k_prime


@dataclass(frozen=True)
class RateMatchSpec:
    e: int
    rv: int = 0

    def __post_init__(self):
        if self.e < 1:
            raise DomainError("rate-matched length e must be >= 1")
        if self.rv not in (0, 1, 2, 3):
            raise DomainError("redundancy version must be 0..3")


def tb_crc_id(size_a: int) -> str:
    return "24A" if size_a > 3824 else "16"


def _kb(bg: BaseGraphId, b: int) -> int:
    if bg is BaseGraphId.BG1:
        return 22
    if b > 640:
        return 10
    if b > 560:
        return 9
    if b > 192:
        return 8
    return 6


def segmentation_params(b: int, bg: BaseGraphId) -> tuple[int, int, int, int]:
    """``(C, L, K', Z)`` for a CRC-appended transport block of ``b`` bits."""
    kcb = bg.max_cb_size
    if b <= kcb:
        c, l = 1, 0
    else:
        l = CB_CRC_LEN
        c = math.ceil(b / (kcb - l))
    k_prime = math.ceil((b + c * l) / c)
    z = min_lifting_size(_kb(bg, b), k_prime)
    return c, l, k_prime, z


def segment(tb_with_crc, bg: BaseGraphId) -> list[CodeBlock]:
    bits = np.asarray(tb_with_crc, dtype=np.uint8).ravel()
    if bits.size == 0:
        raise DomainError("cannot segment an empty block")
    c, l, k_prime, z = segmentation_params(bits.size, bg)
    k = bg.kb * z
    per_cb = k_prime - l
    blocks = []
    for r in range(c):
        data = bits[r * per_cb:(r + 1) * per_cb]
        payload = crc_attach(data, CB_CRC) if l else data
        padded = np.zeros(k, dtype=np.uint8)
        padded[:payload.size] = payload
        blocks.append(CodeBlock(padded, payload.size, z, bg, bool(l)))
    return blocks


def desegment(cb_payloads: list[np.ndarray], has_crc: bool) -> np.ndarray:
    """Concatenate code-block data parts (CB CRCs stripped when present)."""
    parts = [np.asarray(p, dtype=np.uint8)[:-CB_CRC_LEN] if has_crc else np.asarray(p, dtype=np.uint8)
             for p in cb_payloads]
    return np.concatenate(parts)


def circular_buffer_size(bg: BaseGraphId, z: int) -> int:
    return (bg.shape[1] - 2) * z


def k0(bg: BaseGraphId, z: int, rv: int) -> int:
    ncb = circular_buffer_size(bg, z)
    frac = _K0[bg][rv]
    return (frac * ncb // ((bg.shape[1] - 2) * z)) * z


def filler_mask(bg: BaseGraphId, z: int, k_prime: int) -> np.ndarray:
    """Filler positions inside the transmitted (punctured) codeword."""
    ncb = circular_buffer_size(bg, z)
    mask = np.zeros(ncb, dtype=bool)
    lo = max(k_prime - 2 * z, 0)
    hi = bg.kb * z - 2 * z
    mask[lo:hi] = True
    return mask


def rate_match_indices(spec: RateMatchSpec, bg: BaseGraphId, z: int, fillers=None) -> np.ndarray:
    ncb = circular_buffer_size(bg, z)
    if fillers is None:
        fillers = np.zeros(ncb, dtype=bool)
    order = np.roll(np.arange(ncb), -k0(bg, z, spec.rv))
    usable = order[~fillers[order]]
    return usable[np.arange(spec.e) % usable.size]


def rate_match(coded, spec: RateMatchSpec, bg: BaseGraphId, z: int, fillers=None) -> np.ndarray:
    """Read ``spec.e`` bits from the circular buffer starting at the RV offset,
    skipping filler positions."""
    coded = np.asarray(coded, dtype=np.uint8)
    if coded.shape[-1] != circular_buffer_size(bg, z):
        raise DomainError("coded length does not match the circular buffer")
    return coded[..., rate_match_indices(spec, bg, z, fillers)]


def rate_recover(llr, spec: RateMatchSpec, bg: BaseGraphId, z: int, fillers=None) -> np.ndarray:
    """Soft inverse of :func:`rate_match`: returns LLRs for the full lifted
    codeword, with punctured bits at 0 and fillers pinned to a large value."""
    llr = np.asarray(llr, dtype=float)
    ncb = circular_buffer_size(bg, z)
    idx = rate_match_indices(spec, bg, z, fillers)
    buf = np.bincount(idx, weights=llr, minlength=ncb)
    if fillers is not None:
        buf[fillers] = FILLER_LLR
    return np.concatenate([np.zeros(2 * z), buf])


def bit_interleave(e_bits, qm: int) -> np.ndarray:
    e_bits = np.asarray(e_bits)
    if e_bits.size % qm:
        raise DomainError("rate-matched length must be a multiple of Qm")
    return e_bits.reshape(qm, -1).T.ravel()


def bit_deinterleave(f, qm: int) -> np.ndarray:
    f = np.asarray(f)
    return f.reshape(-1, qm).T.ravel()


def concat(blocks: list[np.ndarray]) -> np.ndarray:
    return np.concatenate([np.asarray(b) for b in blocks]) if blocks else np.zeros(0, np.uint8)


@dataclass
class TransportPlan:
    size_a: int
    tb_crc: str
    bg: BaseGraphId
    num_cb: int
    cb_crc_len: int
    k_prime: list[int]
    lifting_size: int
    e: list[int]
    qm: int
    rv: int = 0
    num_layers: int = 1
    fillers: list[np.ndarray] = field(default_factory=list, repr=False)

    @property
    def g(self) -> int:
        return sum(self.e)


def plan_transport(size_a: int, g: int, qm: int, code_rate: float, rv: int = 0,
                   num_layers: int = 1, bg: BaseGraphId | None = None) -> TransportPlan:
    if g % (qm * num_layers):
        raise DomainError("G must be a multiple of Qm * layers")
    tb_crc = tb_crc_id(size_a)
    b = size_a + int(tb_crc[:2])
    bg = bg or select_base_graph(size_a, code_rate)
    c, l, k_prime, z = segmentation_params(b, bg)
    per_cb = k_prime - l
    kps = [min(per_cb, b - r * per_cb) + l for r in range(c)]
    if kps[-1] <= l:
        raise DomainError("segmentation produced an empty code block")
    unit = num_layers * qm
    q = g // unit
    e = [unit * (q // c) if r <= c - (q % c) - 1 else unit * -(-q // c) for r in range(c)]
    fillers = [filler_mask(bg, z, kp) for kp in kps]
    return TransportPlan(size_a, tb_crc, bg, c, l, kps, z, e, qm, rv, num_layers, fillers)


def encode_transport(tb_bits, plan: TransportPlan) -> np.ndarray:
    tb_bits = np.asarray(tb_bits, dtype=np.uint8)
    if tb_bits.size != plan.size_a:
        raise DomainError("transport block size does not match the plan")
    blocks = segment(crc_attach(tb_bits, plan.tb_crc), plan.bg)
    code = ldpc_code(plan.bg, plan.lifting_size)
    cws = code.encode(np.stack([cb.bits for cb in blocks]))[:, 2 * plan.lifting_size:]
    out = []
    for r, cw in enumerate(cws):
        spec = RateMatchSpec(plan.e[r], plan.rv)
        e_bits = rate_match(cw, spec, plan.bg, plan.lifting_size, plan.fillers[r])
        out.append(bit_interleave(e_bits, plan.qm))
    return concat(out)


def decode_transport(llr, plan: TransportPlan, max_iters: int = 25):
    """Returns ``(tb_bits, tb_ok, cb_ok)``."""
    llr = np.asarray(llr, dtype=float)
    if llr.size != plan.g:
        raise DomainError(f"expected {plan.g} LLRs, got {llr.size}")
    z = plan.lifting_size
    full = []
    pos = 0
    for r in range(plan.num_cb):
        f = llr[pos:pos + plan.e[r]]
        pos += plan.e[r]
        spec = RateMatchSpec(plan.e[r], plan.rv)
        full.append(rate_recover(bit_deinterleave(f, plan.qm), spec, plan.bg, z, plan.fillers[r]))
    bits, _ = ldpc_code(plan.bg, z).decode(np.stack(full), max_iters=max_iters)
    payloads = [bits[r, :plan.k_prime[r]] for r in range(plan.num_cb)]
    if plan.cb_crc_len:
        cb_ok = np.array([crc_check(p, CB_CRC) for p in payloads])
    else:
        cb_ok = np.ones(1, dtype=bool)
    tb_with_crc = desegment(payloads, bool(plan.cb_crc_len))
    tb_ok = bool(cb_ok.all()) and crc_check(tb_with_crc, plan.tb_crc)
    return tb_with_crc[:plan.size_a], tb_ok, cb_ok
