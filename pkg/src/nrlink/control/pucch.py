"""PUCCH formats 0-4, resource sets and resource selection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from nrlink.coding.polar import PolarSpec, polar_decode, polar_encode
from nrlink.coding.smallblock import MAX_PAYLOAD as SMALL_BLOCK_MAX
from nrlink.coding.smallblock import small_block_decode, small_block_encode
from nrlink.errors import DomainError
from nrlink.modulation import ModOrder, modulate, soft_demod, transform_deprecode, transform_precode
from nrlink.numerology import SUBCARRIERS_PER_RB, SYMBOLS_PER_SLOT
from nrlink.sequences import descramble_llr, low_papr_sequence, qpsk_gold, scramble

SHORT_FORMATS = (0, 2)
LONG_FORMATS = (1, 3, 4)
MAX_SET0 = 32
MAX_SET_OTHER = 8
MAX_SETS = 4
SET0_MAX_BITS = 2
F2_DMRS_SUBCARRIERS = (1, 4, 7, 10)
F2_DATA_SUBCARRIERS = tuple(k for k in range(12) if k not in F2_DMRS_SUBCARRIERS)

# number of PUCCH symbols -> DMRS symbols for formats 3/4 (no hopping, no additional DMRS)
F34_DMRS_SYMBOLS = {
    4: (1,), 5: (0, 3), 6: (1, 4), 7: (1, 4), 8: (1, 5), 9: (1, 6), 10: (2, 7),
    11: (2, 7), 12: (2, 8), 13: (2, 9), 14: (3, 10),
}
# format 4 cover codes per 12/SF-subcarrier block
F4_OCC = {
    2: np.array([[1, 1], [1, -1]], dtype=complex),
    4: np.array([[1, 1, 1, 1], [1, -1j, -1, 1j], [1, -1, 1, -1], [1, 1j, -1, -1j]]),
}
F4_DMRS_SHIFT = {2: (0, 6), 4: (0, 6, 3, 9)}
F0_SHIFT = {1: {(0,): 0, (1,): 6}, 2: {(0, 0): 0, (0, 1): 3, (1, 1): 6, (1, 0): 9}}


def _valid_f3_rbs(n: int) -> bool:
    for p in (2, 3, 5):
        while n % p == 0:
            n //= p
    return n == 1


@dataclass(frozen=True)
class PucchResource:
    format: int
    start_symbol: int = 0
    num_symbols: int = 1
    start_rb: int = 0
    num_rb: int = 1
    cyclic_shift: int = 0
    occ_index: int = 0
    occ_length: int = 2
    group: int = 0
    nid: int = 0
    rnti: int = 0

    def __post_init__(self):
        f, n = self.format, self.num_symbols
        if f not in (0, 1, 2, 3, 4):
            raise DomainError("PUCCH format must be 0..4")
        if f in SHORT_FORMATS and n not in (1, 2):
            raise DomainError(f"format {f} uses 1 or 2 symbols")
        if f in LONG_FORMATS and not 4 <= n <= 14:
            raise DomainError(f"format {f} uses 4 to 14 symbols")
        if self.start_symbol < 0 or self.start_symbol + n > SYMBOLS_PER_SLOT:
            raise DomainError("PUCCH resource must fit the slot")
        if f in (0, 1, 4) and self.num_rb != 1:
            raise DomainError(f"format {f} occupies one RB")
        if f == 2 and not 1 <= self.num_rb <= 16:
            raise DomainError("format 2 occupies 1..16 RBs")
        if f == 3 and not (1 <= self.num_rb <= 16 and _valid_f3_rbs(self.num_rb)):
            raise DomainError("format 3 RB count must be 2^a 3^b 5^c, at most 16")
        if not 0 <= self.cyclic_shift < 12:
            raise DomainError("cyclic shift index must be 0..11")
        if f == 1 and not 0 <= self.occ_index < n // 2:
            raise DomainError("format 1 OCC index exceeds the spreading length")
        if f == 4 and (self.occ_length not in F4_OCC or not 0 <= self.occ_index < self.occ_length):
            raise DomainError("format 4 OCC length must be 2 or 4 with a valid index")

    @property
    def max_bits(self) -> int | None:
        return SET0_MAX_BITS if self.format in (0, 1) else None

    def capacity_bits(self) -> int:
        """Coded bits available for formats 2-4."""
        n = self.num_symbols
        if self.format == 2:
            return 2 * len(F2_DATA_SUBCARRIERS) * self.num_rb * n
        if self.format == 3:
            return 2 * 12 * self.num_rb * (n - len(F34_DMRS_SYMBOLS[n]))
        if self.format == 4:
            return 2 * (12 // self.occ_length) * (n - len(F34_DMRS_SYMBOLS[n]))
        raise DomainError("formats 0/1 carry sequence-coded UCI")


@dataclass(frozen=True)
class PucchResourceSets:
    """``max_bits[i]`` is the largest UCI size served by set ``i``; set 0
    always serves up to 2 bits."""

    sets: tuple[tuple[PucchResource, ...], ...]
    max_bits: tuple[int, ...] = (2, 11, 100, 1706)

    def __post_init__(self):
        if not 1 <= len(self.sets) <= MAX_SETS:
            raise DomainError("1..4 PUCCH resource sets")
        if len(self.max_bits) < len(self.sets) or self.max_bits[0] != SET0_MAX_BITS:
            raise DomainError("set 0 serves at most 2 bits; give a bound per set")
        if any(a >= b for a, b in zip(self.max_bits, self.max_bits[1:len(self.sets)])):
            raise DomainError("set payload bounds must increase")
        for i, s in enumerate(self.sets):
            cap = MAX_SET0 if i == 0 else MAX_SET_OTHER
            if not 1 <= len(s) <= cap:
                raise DomainError(f"set {i} holds 1..{cap} resources")
            if i > 0 and any(r.format in (0, 1) for r in s):
                raise DomainError("formats 0/1 only belong to set 0")


def select_resource_set(uci_bits: int, sets: PucchResourceSets) -> int:
    if uci_bits < 1:
        raise DomainError("UCI size must be positive")
    for i in range(len(sets.sets)):
        if uci_bits <= sets.max_bits[i]:
            return i
    raise DomainError(f"no PUCCH resource set covers {uci_bits} UCI bits")


def implicit_index(dci_field: int, set_size: int, n_cce: int = 0, num_cce: int = 1) -> int:
    """``dci * ceil(R/8) + floor(n_cce * ceil(R/8) / N_cce)`` clipped to the set."""
    step = math.ceil(set_size / 8)
    return min(dci_field * step + (n_cce * step) // max(num_cce, 1), set_size - 1)


def select_pucch_resource(uci_bits: int, sets: PucchResourceSets, dci_field: int,
                          n_cce: int = 0, num_cce: int = 1) -> PucchResource:
    if not 0 <= dci_field <= 7:
        raise DomainError("the resource indicator is a 3-bit field")
    s = sets.sets[select_resource_set(uci_bits, sets)]
    if len(s) > 8:
        return s[implicit_index(dci_field, len(s), n_cce, num_cce)]
    if dci_field >= len(s):
        raise DomainError(f"resource indicator {dci_field} exceeds set size {len(s)}")
    return s[dci_field]


@dataclass
class PucchMapping:
    ks: np.ndarray
    ls: np.ndarray
    values: np.ndarray
    is_dmrs: np.ndarray

    def __len__(self) -> int:
        return int(self.ks.size)


def _alpha(m: int) -> float:
    return 2 * np.pi * (m % 12) / 12


def _rb_subcarriers(res: PucchResource) -> np.ndarray:
    return SUBCARRIERS_PER_RB * res.start_rb + np.arange(SUBCARRIERS_PER_RB * res.num_rb)


def _check_bits(res: PucchResource, bits: np.ndarray) -> None:
    if res.format in (0, 1):
        if not 1 <= bits.size <= SET0_MAX_BITS:
            raise DomainError(f"format {res.format} carries 1 or 2 UCI bits, got {bits.size}")
    elif bits.size <= SET0_MAX_BITS:
        raise DomainError(f"format {res.format} carries more than 2 UCI bits")


def uci_crc_len(k: int) -> int:
    return 6 if k <= 19 else 11


def _uci_polar_spec(k: int, e: int) -> PolarSpec:
    return PolarSpec(k, e, crc_len=uci_crc_len(k), list_size=8)


def uci_encode(bits: np.ndarray, e: int) -> np.ndarray:
    """Small block code up to 11 bits, polar beyond."""
    if bits.size <= SMALL_BLOCK_MAX:
        return small_block_encode(bits, e)
    spec = _uci_polar_spec(bits.size, e)
    return polar_encode(bits, spec)


def uci_decode(llr: np.ndarray, k: int):
    if k <= SMALL_BLOCK_MAX:
        return small_block_decode(llr, k), True
    payload, ok = polar_decode(llr, _uci_polar_spec(k, llr.size))
    return payload, bool(ok)


def _scramble_c_init(res: PucchResource) -> int:
    return (res.rnti * 2**15 + res.nid) % 2**31


def _f2_dmrs(res: PucchResource, slot: int, l: int) -> np.ndarray:
    c = (2**17 * (SYMBOLS_PER_SLOT * slot + l + 1) * (2 * res.nid + 1) + 2 * res.nid) % 2**31
    r = qpsk_gold(c, 4 * (res.start_rb + res.num_rb))
    return r[4 * res.start_rb:]


def _dft_occ(length: int, index: int) -> np.ndarray:
    return np.exp(2j * np.pi * index * np.arange(length) / length)


def build_pucch(res: PucchResource, uci_bits, slot: int = 0) -> PucchMapping:
    bits = np.asarray(uci_bits, dtype=np.uint8).ravel()
    _check_bits(res, bits)
    syms = np.arange(res.start_symbol, res.start_symbol + res.num_symbols)
    ks_rb = _rb_subcarriers(res)
    ks, ls, vals, dm = [], [], [], []

    def put(k, l, v, is_dmrs):
        ks.append(np.asarray(k))
        ls.append(np.full(np.size(k), l))
        vals.append(np.asarray(v, dtype=complex))
        dm.append(np.full(np.size(k), is_dmrs))

    if res.format == 0:
        m_cs = F0_SHIFT[bits.size][tuple(bits.tolist())]
        seq = low_papr_sequence(res.group, 12, alpha=_alpha(res.cyclic_shift + m_cs))
        for l in syms:
            put(ks_rb, l, seq, False)
    elif res.format == 1:
        d = modulate(bits, ModOrder.BPSK if bits.size == 1 else ModOrder.QPSK)[0]
        seq = low_papr_sequence(res.group, 12, alpha=_alpha(res.cyclic_shift))
        n_dmrs = (res.num_symbols + 1) // 2
        n_uci = res.num_symbols // 2
        w_dmrs = _dft_occ(n_dmrs, res.occ_index % n_dmrs)
        w_uci = _dft_occ(n_uci, res.occ_index)
        for i, l in enumerate(syms):
            if i % 2 == 0:
                put(ks_rb, l, w_dmrs[i // 2] * seq, True)
            else:
                put(ks_rb, l, w_uci[i // 2] * d * seq, False)
    elif res.format == 2:
        e = res.capacity_bits()
        coded = scramble(uci_encode(bits, e), _scramble_c_init(res))
        data = modulate(coded, ModOrder.QPSK).reshape(res.num_symbols, -1)
        rb = np.arange(res.start_rb, res.start_rb + res.num_rb)
        dk = (12 * rb[:, None] + np.array(F2_DATA_SUBCARRIERS)).ravel()
        pk = (12 * rb[:, None] + np.array(F2_DMRS_SUBCARRIERS)).ravel()
        for i, l in enumerate(syms):
            put(dk, l, data[i], False)
            put(pk, l, _f2_dmrs(res, slot, int(l)), True)
    else:
        dmrs_rel = F34_DMRS_SYMBOLS[res.num_symbols]
        m = SUBCARRIERS_PER_RB * res.num_rb
        e = res.capacity_bits()
        coded = scramble(uci_encode(bits, e), _scramble_c_init(res))
        data = modulate(coded, ModOrder.QPSK)
        if res.format == 3:
            blocks = data.reshape(-1, m)
            dmrs_cs = res.cyclic_shift
        else:
            sf = res.occ_length
            w = np.repeat(F4_OCC[sf][res.occ_index], 12 // sf)
            blocks = np.tile(data.reshape(-1, 12 // sf), (1, sf)) * w
            dmrs_cs = res.cyclic_shift + F4_DMRS_SHIFT[sf][res.occ_index]
        dmrs = low_papr_sequence(res.group, m, alpha=_alpha(dmrs_cs))
        j = 0
        for i, l in enumerate(syms):
            if i in dmrs_rel:
                put(ks_rb, l, dmrs, True)
            else:
                put(ks_rb, l, transform_precode(blocks[j], m), False)
                j += 1
    return PucchMapping(np.concatenate(ks), np.concatenate(ls), np.concatenate(vals), np.concatenate(dm))


def decode_pucch(res: PucchResource, rx_values, num_bits: int, noise_var: float = 1e-3, slot: int = 0):
    """Decode received values at the REs of :func:`build_pucch`, same order.

    Returns ``(bits, ok)``; ``ok`` is a CRC verdict for polar payloads and
    ``True`` otherwise.
    """
    y = np.asarray(rx_values, dtype=complex).ravel()
    probe = np.zeros(max(num_bits, 1), np.uint8)
    ref = build_pucch(res, probe, slot)
    if y.size != len(ref):
        raise DomainError("received value count does not match the resource")
    if res.format == 0:
        best, best_score = None, -1.0
        for pattern in F0_SHIFT[num_bits]:
            cand = build_pucch(res, np.array(pattern), slot).values
            score = abs(np.vdot(cand, y))
            if score > best_score:
                best, best_score = pattern, score
        return np.array(best, np.uint8), True
    dm = ref.is_dmrs
    h = np.vdot(ref.values[dm], y[dm]) / np.vdot(ref.values[dm], ref.values[dm])
    if res.format == 1:
        # despread the UCI symbols against the all-ones symbol reference
        ones = build_pucch(res, np.zeros(num_bits, np.uint8), slot)
        d_hat = np.vdot(ones.values[~dm], y[~dm]) / np.vdot(ones.values[~dm], ones.values[~dm]) / h
        order = ModOrder.BPSK if num_bits == 1 else ModOrder.QPSK
        ref_sym = modulate(np.zeros(num_bits, np.uint8), order)[0]
        llr = soft_demod(np.array([d_hat * ref_sym]), order, noise_var)
        return (llr < 0).astype(np.uint8)[:num_bits], True
    z = y[~dm] / h
    e = res.capacity_bits()
    if res.format == 2:
        data = z
    else:
        m = SUBCARRIERS_PER_RB * res.num_rb
        blocks = transform_deprecode(z, m).reshape(-1, m)
        if res.format == 3:
            data = blocks.ravel()
        else:
            sf = res.occ_length
            w = np.repeat(F4_OCC[sf][res.occ_index], 12 // sf)
            data = (blocks * np.conj(w)).reshape(blocks.shape[0], sf, 12 // sf).mean(axis=1).ravel()
    llr = descramble_llr(soft_demod(data, ModOrder.QPSK, noise_var / abs(h) ** 2), _scramble_c_init(res))
    return uci_decode(llr[:e], num_bits)
