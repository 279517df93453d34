"""PDCCH: CORESET/REG/CCE structure, candidate assembly and blind search."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from nrlink.coding.polar import PolarSpec, polar_decode, polar_encode
from nrlink.errors import DomainError
from nrlink.modulation import ModOrder, modulate, soft_demod
from nrlink.numerology import SUBCARRIERS_PER_RB, SYMBOLS_PER_SLOT, ResourceGrid
from nrlink.sequences import descramble_llr, qpsk_gold, scramble

AGGREGATION_LEVELS = (1, 2, 4, 8, 16)
REGS_PER_CCE = 6
RES_PER_REG = SUBCARRIERS_PER_RB
DMRS_SUBCARRIERS = (1, 5, 9)
DATA_SUBCARRIERS = tuple(k for k in range(RES_PER_REG) if k not in DMRS_SUBCARRIERS)
DATA_RES_PER_CCE = REGS_PER_CCE * len(DATA_SUBCARRIERS)
DCI_CRC_LEN = 24
RNTI_BITS = 16


class CceMapping(enum.Enum):
    INTERLEAVED = "INTERLEAVED"
    NON_INTERLEAVED = "NON_INTERLEAVED"


@dataclass(frozen=True)
class Reg:
    rb: int
    symbol: int


@dataclass(frozen=True)
class Coreset:
    """``symbol`` values of REGs are relative to ``start_symbol``.

    REGs are numbered time-first across the sorted RB set. Interleaving
    groups REGs into bundles of ``bundle_size`` and permutes bundles with a
    ``rows``-row block interleaver plus a cyclic ``shift``.
    """

    rb_set: tuple[int, ...]
    num_symbols: int = 1
    mapping: CceMapping = CceMapping.NON_INTERLEAVED
    bundle_size: int = 6
    rows: int = 2
    shift: int = 0
    start_symbol: int = 0

    def __post_init__(self):
        rbs = tuple(sorted(set(int(r) for r in self.rb_set)))
        object.__setattr__(self, "rb_set", rbs)
        if not rbs or rbs[0] < 0:
            raise DomainError("CORESET needs a non-empty set of non-negative RBs")
        if self.num_symbols not in (1, 2, 3):
            raise DomainError("CORESET spans 1, 2 or 3 symbols")
        if self.start_symbol < 0 or self.start_symbol + self.num_symbols > SYMBOLS_PER_SLOT:
            raise DomainError("CORESET must fit in the slot")
        if self.num_regs % REGS_PER_CCE:
            raise DomainError(f"{self.num_regs} REGs is not a whole number of CCEs")
        if self.mapping is CceMapping.INTERLEAVED:
            if self.bundle_size not in (2, 3, 6) or self.bundle_size % self.num_symbols:
                raise DomainError("bundle size must be 2, 3 or 6 and a multiple of the CORESET length")
            if self.rows not in (2, 3, 6):
                raise DomainError("interleaver rows must be 2, 3 or 6")
            if (self.num_regs // self.bundle_size) % self.rows:
                raise DomainError("bundle count must be divisible by the interleaver rows")
        elif self.bundle_size != 6:
            raise DomainError("non-interleaved mapping uses bundles of 6 REGs")

    @property
    def num_regs(self) -> int:
        return len(self.rb_set) * self.num_symbols

    @property
    def num_cces(self) -> int:
        return self.num_regs // REGS_PER_CCE

    def reg(self, index: int) -> Reg:
        i, sym = divmod(index, self.num_symbols)
        return Reg(self.rb_set[i], sym)

    def bundle_permutation(self) -> np.ndarray:
        """``perm[x]`` is the physical bundle carrying logical bundle ``x``."""
        nb = self.num_regs // self.bundle_size
        x = np.arange(nb)
        if self.mapping is CceMapping.NON_INTERLEAVED:
            return x
        c = nb // self.rows
        col, row = divmod(x, self.rows)
        return (row * c + col + self.shift) % nb


def cce_to_regs(coreset: Coreset, cce_index: int) -> list[Reg]:
    if not 0 <= cce_index < coreset.num_cces:
        raise DomainError(f"CCE {cce_index} outside 0..{coreset.num_cces - 1}")
    lb = coreset.bundle_size
    perm = coreset.bundle_permutation()
    per = REGS_PER_CCE // lb
    out = []
    for j in range(per):
        b = int(perm[cce_index * per + j])
        out.extend(coreset.reg(b * lb + i) for i in range(lb))
    return out


@dataclass(frozen=True)
class PdcchCandidate:
    aggregation_level: int
    candidate_index: int
    rnti: int
    first_cce: int = 0

    def __post_init__(self):
        if self.aggregation_level not in AGGREGATION_LEVELS:
            raise DomainError(f"aggregation level must be one of {AGGREGATION_LEVELS}")
        if not 0 <= self.rnti < 2**RNTI_BITS:
            raise DomainError("RNTI is a 16-bit value")

    @property
    def cces(self) -> range:
        return range(self.first_cce, self.first_cce + self.aggregation_level)


@dataclass(frozen=True)
class SearchSpace:
    candidates: dict = field(default_factory=lambda: {1: 2, 2: 2, 4: 2, 8: 1, 16: 1})
    slot: int = 0

    def __post_init__(self):
        for lvl, m in self.candidates.items():
            if lvl not in AGGREGATION_LEVELS or m < 0:
                raise DomainError(f"invalid candidate count {m} at level {lvl}")


HASH_A = 39827
HASH_D = 65537


def candidate_first_cce(rnti: int, level: int, m: int, num_candidates: int, num_cces: int) -> int:
    """``L * ((Y + floor(m N / (L M))) mod floor(N / L))`` with ``Y = 39827 rnti mod 65537``."""
    slots = num_cces // level
    if slots == 0:
        raise DomainError(f"level {level} exceeds the CORESET's {num_cces} CCEs")
    y = (HASH_A * rnti) % HASH_D
    return level * ((y + (m * num_cces) // (level * num_candidates)) % slots)


def search_candidates(coreset: Coreset, space: SearchSpace, rnti: int) -> list[PdcchCandidate]:
    """Distinct candidates ordered by level then candidate index."""
    out = []
    for lvl in sorted(space.candidates):
        m_total = space.candidates[lvl]
        if lvl > coreset.num_cces or m_total == 0:
            continue
        seen = set()
        for m in range(m_total):
            first = candidate_first_cce(rnti, lvl, m, m_total, coreset.num_cces)
            if first in seen:
                continue
            seen.add(first)
            out.append(PdcchCandidate(lvl, m, rnti, first))
    return out


def rnti_mask(rnti: int) -> np.ndarray:
    return np.array([(rnti >> (RNTI_BITS - 1 - i)) & 1 for i in range(RNTI_BITS)], dtype=np.uint8)


def dci_polar_spec(payload_len: int, level: int, list_size: int = 8) -> PolarSpec:
    e = 2 * DATA_RES_PER_CCE * level
    if payload_len + DCI_CRC_LEN > e:
        raise DomainError(f"DCI of {payload_len} bits does not fit aggregation level {level}")
    return PolarSpec(payload_len, e, crc_len=DCI_CRC_LEN, list_size=list_size)


def data_c_init(rnti: int, nid: int) -> int:
    return (rnti * 2**16 + nid) % 2**31


def dmrs_c_init(slot: int, symbol: int, nid: int) -> int:
    return (2**17 * (SYMBOLS_PER_SLOT * slot + symbol + 1) * (2 * nid + 1) + 2 * nid) % 2**31


@dataclass
class PdcchMapping:
    ks: np.ndarray
    ls: np.ndarray
    values: np.ndarray
    is_dmrs: np.ndarray

    def __len__(self) -> int:
        return int(self.ks.size)


def _candidate_res(coreset: Coreset, cand: PdcchCandidate):
    """Data and DMRS RE coordinates, REG by REG in CCE order."""
    regs = [r for c in cand.cces for r in cce_to_regs(coreset, c)]
    rb = np.array([r.rb for r in regs])
    sym = np.array([r.symbol for r in regs]) + coreset.start_symbol
    dk = (SUBCARRIERS_PER_RB * rb[:, None] + np.array(DATA_SUBCARRIERS)[None, :]).ravel()
    dl = np.repeat(sym, len(DATA_SUBCARRIERS))
    pk = (SUBCARRIERS_PER_RB * rb[:, None] + np.array(DMRS_SUBCARRIERS)[None, :]).ravel()
    pl = np.repeat(sym, len(DMRS_SUBCARRIERS))
    return rb, sym, dk, dl, pk, pl


def _dmrs_values(rb: np.ndarray, sym: np.ndarray, nid: int, slot: int) -> np.ndarray:
    out = np.empty((rb.size, len(DMRS_SUBCARRIERS)), complex)
    for l in np.unique(sym):
        sel = sym == l
        r = qpsk_gold(dmrs_c_init(slot, int(l), nid), 3 * (int(rb.max()) + 1))
        out[sel] = r[3 * rb[sel][:, None] + np.arange(3)[None, :]]
    return out.ravel()


def assemble_pdcch(dci_bits, cand: PdcchCandidate, coreset: Coreset, nid: int = 0, slot: int = 0) -> PdcchMapping:
    dci = np.asarray(dci_bits, dtype=np.uint8).ravel()
    if cand.first_cce + cand.aggregation_level > coreset.num_cces:
        raise DomainError("candidate extends beyond the CORESET")
    spec = dci_polar_spec(dci.size, cand.aggregation_level)
    coded = polar_encode(dci, spec, crc_mask=rnti_mask(cand.rnti))
    sym = modulate(scramble(coded, data_c_init(cand.rnti, nid)), ModOrder.QPSK)
    rb, regsym, dk, dl, pk, pl = _candidate_res(coreset, cand)
    dmrs = _dmrs_values(rb, regsym, nid, slot)
    return PdcchMapping(
        np.concatenate([dk, pk]), np.concatenate([dl, pl]), np.concatenate([sym, dmrs]),
        np.concatenate([np.zeros(dk.size, bool), np.ones(pk.size, bool)]),
    )


def map_pdcch(grid: ResourceGrid, m: PdcchMapping, port: int = 0) -> None:
    grid.map_array(port, m.ks[~m.is_dmrs], m.ls[~m.is_dmrs], m.values[~m.is_dmrs], "PDCCH")
    grid.map_array(port, m.ks[m.is_dmrs], m.ls[m.is_dmrs], m.values[m.is_dmrs], "PDCCH_DMRS")


@dataclass(frozen=True)
class DecodedDci:
    aggregation_level: int
    candidate_index: int
    first_cce: int
    payload: np.ndarray


def _grid_values(grid) -> np.ndarray:
    if isinstance(grid, ResourceGrid):
        return grid.values[0]
    g = np.asarray(grid)
    return g[0] if g.ndim == 3 else g


def blind_search(grid, coreset: Coreset, search_space: SearchSpace, rnti: int, dci_len: int,
                 nid: int = 0, noise_var: float | None = None, list_size: int = 8) -> list[DecodedDci]:
    """Decode every candidate of ``rnti``; return the CRC-passing ones.

    Each REG's channel is the mean LS estimate over its three DMRS REs.
    """
    g = _grid_values(grid)
    slot = search_space.slot
    by_level: dict[int, list[tuple[PdcchCandidate, np.ndarray]]] = {}
    for cand in search_candidates(coreset, search_space, rnti):
        try:
            spec = dci_polar_spec(dci_len, cand.aggregation_level)
        except DomainError:
            continue
        rb, regsym, dk, dl, pk, pl = _candidate_res(coreset, cand)
        ref = _dmrs_values(rb, regsym, nid, slot).reshape(-1, 3)
        h = (g[pk, pl].reshape(-1, 3) * np.conj(ref)).mean(axis=1)
        y = g[dk, dl].reshape(-1, len(DATA_SUBCARRIERS))
        if noise_var is None:
            resid = g[pk, pl].reshape(-1, 3) - h[:, None] * ref
            nv = max(float(np.mean(np.abs(resid) ** 2)) * 1.5, 1e-3)
        else:
            nv = noise_var
        hp = np.maximum(np.abs(h) ** 2, 1e-12)
        eq = (y * np.conj(h)[:, None] / hp[:, None]).ravel()
        llr = soft_demod(eq, ModOrder.QPSK, np.repeat(nv / hp, len(DATA_SUBCARRIERS)))
        llr = descramble_llr(llr, data_c_init(rnti, nid))
        by_level.setdefault(cand.aggregation_level, []).append((cand, llr))
    found = []
    for lvl in sorted(by_level):
        cands, llrs = zip(*by_level[lvl])
        spec = dci_polar_spec(dci_len, lvl, list_size)
        payloads, ok = polar_decode(np.stack(llrs), spec, crc_mask=rnti_mask(rnti))
        for cand, p, passed in zip(cands, payloads, ok):
            if passed:
                found.append(DecodedDci(lvl, cand.candidate_index, cand.first_cce, p))
    return found
