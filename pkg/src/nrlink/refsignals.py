"""Reference-signal positions and sequences: DMRS, PTRS, CSI-RS, SRS.

Every mapping function returns :class:`RsMapping` objects holding absolute
subcarrier/symbol indices and complex values per antenna port.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from nrlink.errors import DomainError
from nrlink.numerology import (
    SUBCARRIERS_PER_RB,
    SYMBOLS_PER_SLOT,
    Allocation,
    Granularity,
    ReservedPattern,
)
from nrlink.sequences import low_papr_sequence, qpsk_gold

MAX_DMRS_PORTS = 12


@dataclass
class RsMapping:
    ks: np.ndarray
    ls: np.ndarray
    values: np.ndarray | None = None

    def __len__(self) -> int:
        return int(self.ks.size)

    def re_set(self) -> set[tuple[int, int]]:
        return set(zip(self.ks.tolist(), self.ls.tolist()))


def _stack(parts: list[RsMapping], with_values: bool = True) -> RsMapping:
    if not parts:
        return RsMapping(np.zeros(0, int), np.zeros(0, int), np.zeros(0, complex) if with_values else None)
    ks = np.concatenate([p.ks for p in parts])
    ls = np.concatenate([p.ls for p in parts])
    vals = np.concatenate([p.values for p in parts]) if with_values else None
    return RsMapping(ks, ls, vals)


class SequenceMode(enum.Enum):
    GOLD_QPSK = "GOLD_QPSK"
    ZC_LOW_PAPR = "ZC_LOW_PAPR"


@dataclass(frozen=True)
class DmrsConfig:
    """Front-loaded DMRS with three CDM groups of adjacent subcarrier pairs.

    Port ``p`` uses CDM group ``(p // 2) % 3``, frequency cover code
    ``p % 2`` and time cover code ``p // 6`` (the latter needs two front
    symbols). DMRS symbols carry no data.
    """

    num_front_symbols: int = 1
    additional_positions: int = 0
    num_ports: int = 1
    sequence_mode: SequenceMode = SequenceMode.GOLD_QPSK
    bundle_size: int = 2

    def __post_init__(self):
        if self.num_front_symbols not in (1, 2):
            raise DomainError("DMRS front-loaded length must be 1 or 2 symbols")
        if not 0 <= self.additional_positions <= 3:
            raise DomainError("additional DMRS positions must be 0..3")
        if not 1 <= self.num_ports <= MAX_DMRS_PORTS:
            raise DomainError(f"DMRS supports 1..{MAX_DMRS_PORTS} ports")
        if self.num_ports > 6 and self.num_front_symbols != 2:
            raise DomainError("more than 6 DMRS ports need two front-loaded symbols")
        if self.sequence_mode is SequenceMode.ZC_LOW_PAPR and self.num_ports != 1:
            raise DomainError("the low-PAPR DMRS mode is single-port (DFT-S-OFDM)")
        if self.bundle_size not in (2, 4):
            raise DomainError("RB bundle size must be 2 or 4")


def dmrs_port_params(port: int) -> tuple[int, int, int]:
    """``(cdm_group, fd_code, td_code)`` of a DMRS port."""
    if not 0 <= port < MAX_DMRS_PORTS:
        raise DomainError(f"DMRS port {port} out of range")
    return (port // 2) % 3, port % 2, port // 6


def _walsh(index: int, length: int) -> np.ndarray:
    h = np.array([[1]])
    while h.shape[0] < length:
        h = np.block([[h, h], [h, -h]])
    return h[index]


def dmrs_symbols(cfg: DmrsConfig, alloc: Allocation) -> list[int]:
    """OFDM symbols carrying DMRS, front-loaded at the allocation start."""
    d, nf, extra = alloc.num_symbols, cfg.num_front_symbols, cfg.additional_positions
    starts = [alloc.start_symbol + int(i * d / (extra + 1) + 0.5) for i in range(extra + 1)]
    for a, b in zip(starts, starts[1:]):
        if b - a < nf + 1:
            raise DomainError(
                f"{extra} additional DMRS positions do not fit a {d}-symbol allocation"
            )
    if starts[-1] + nf > alloc.start_symbol + d or (extra and d < 2 * nf + 1):
        raise DomainError(f"{extra} additional DMRS positions do not fit a {d}-symbol allocation")
    return [s + i for s in starts for i in range(nf)]


def dmrs_c_init(slot: int, symbol: int, scrambling_id: int) -> int:
    return (2**17 * (SYMBOLS_PER_SLOT * slot + symbol + 1) * (2 * scrambling_id + 1)
            + 2 * scrambling_id) % 2**31


def dmrs_map(cfg: DmrsConfig, alloc: Allocation, scrambling_id: int = 0, slot: int = 0) -> dict[int, RsMapping]:
    syms = dmrs_symbols(cfg, alloc)
    k_lo = alloc.start_rb * SUBCARRIERS_PER_RB
    nsc = alloc.num_rb * SUBCARRIERS_PER_RB
    out = {}
    if cfg.sequence_mode is SequenceMode.ZC_LOW_PAPR:
        seq = low_papr_sequence(scrambling_id % 30, nsc)
        ks = np.tile(np.arange(k_lo, k_lo + nsc), len(syms))
        ls = np.repeat(syms, nsc)
        out[0] = RsMapping(ks, ls, np.tile(seq, len(syms)))
        return out
    # pairs n cover subcarriers 6n .. 6n+5 counted from carrier subcarrier 0
    n = np.arange(2 * alloc.start_rb, 2 * (alloc.start_rb + alloc.num_rb))
    for p in range(cfg.num_ports):
        lam, fd, td = dmrs_port_params(p)
        wf = _walsh(fd, 2)
        parts = []
        for i, l in enumerate(syms):
            lp = i % cfg.num_front_symbols
            wt = _walsh(td, 2)[lp]
            r = qpsk_gold(dmrs_c_init(slot, l, scrambling_id), 2 * n[-1] + 2)
            ks, vals = [], []
            for kp in (0, 1):
                ks.append(6 * n + kp + 2 * lam)
                vals.append(wf[kp] * wt * r[2 * n + kp])
            ks = np.stack(ks, axis=1).ravel()
            vals = np.stack(vals, axis=1).ravel()
            parts.append(RsMapping(ks, np.full(ks.size, l), vals))
        out[p] = _stack(parts)
    return out


def dmrs_reserved_mask(cfg: DmrsConfig, alloc: Allocation, num_subcarriers: int,
                       num_symbols: int = SYMBOLS_PER_SLOT) -> np.ndarray:
    """Every allocated RE in a DMRS symbol (DMRS symbols carry no data)."""
    mask = np.zeros((num_subcarriers, num_symbols), dtype=bool)
    ks = list(alloc.subcarriers)
    for l in dmrs_symbols(cfg, alloc):
        mask[ks, l] = True
    return mask


@dataclass(frozen=True)
class PtrsConfig:
    freq_density: int = 2
    time_density: int = 1
    assoc_dmrs_port: int = 0

    def __post_init__(self):
        if self.freq_density not in (2, 4):
            raise DomainError("PTRS frequency density must be every 2nd or 4th RB")
        if self.time_density not in (1, 2, 4):
            raise DomainError("PTRS time density must be 1, 2 or 4")


# (SNR threshold dB, time density) and (RB threshold, frequency density);
# values are project choices for the density lookup
PTRS_TIME_DENSITY_TABLE = ((10.0, 4), (20.0, 2), (math.inf, 1))
PTRS_FREQ_DENSITY_TABLE = ((32, 2), (10_000, 4))


def ptrs_config_for(snr_db: float, num_rb: int, assoc_dmrs_port: int = 0) -> PtrsConfig:
    """Pick PTRS densities from static lookup tables."""
    l = next(d for thr, d in PTRS_TIME_DENSITY_TABLE if snr_db < thr)
    k = next(d for thr, d in PTRS_FREQ_DENSITY_TABLE if num_rb <= thr)
    return PtrsConfig(k, l, assoc_dmrs_port)


def ptrs_symbols(time_density: int, alloc: Allocation, dmrs_syms) -> list[int]:
    """Every L-th symbol of the allocation, restarting the count after DMRS."""
    dmrs = set(dmrs_syms)
    out = []
    l_ref, i = alloc.start_symbol, 0
    end = alloc.start_symbol + alloc.num_symbols
    while l_ref + i * time_density < end:
        lo = max(l_ref + (i - 1) * time_density + 1, l_ref)
        window = [l for l in range(lo, l_ref + i * time_density + 1) if l in dmrs]
        if window:
            # restart right after the (last) DMRS symbol hit
            last = max(window)
            while last + 1 in dmrs:
                last += 1
            l_ref, i = last, 1
            continue
        out.append(l_ref + i * time_density)
        i += 1
    return out


def ptrs_map(cfg: PtrsConfig, alloc: Allocation, dmrs_cfg: DmrsConfig | None = None,
             scrambling_id: int = 0, slot: int = 0) -> RsMapping:
    dmrs_cfg = dmrs_cfg or DmrsConfig()
    if cfg.assoc_dmrs_port >= dmrs_cfg.num_ports:
        raise DomainError("associated DMRS port is not part of the allocation")
    lam, _, _ = dmrs_port_params(cfg.assoc_dmrs_port)
    rbs = alloc.start_rb + cfg.freq_density * np.arange(math.ceil(alloc.num_rb / cfg.freq_density))
    ks_rb = SUBCARRIERS_PER_RB * rbs + 2 * lam
    syms = ptrs_symbols(cfg.time_density, alloc, dmrs_symbols(dmrs_cfg, alloc))
    parts = []
    for l in syms:
        r = qpsk_gold(dmrs_c_init(slot, l, scrambling_id), 4 * int(rbs[-1]) + 1)
        parts.append(RsMapping(ks_rb.copy(), np.full(ks_rb.size, l), r[4 * rbs]))
    return _stack(parts)


class Periodicity(enum.Enum):
    PERIODIC = "PERIODIC"
    SEMI_PERSISTENT = "SEMI_PERSISTENT"
    APERIODIC = "APERIODIC"


def _load_csirs_patterns() -> dict[int, tuple[int, ...]]:
    """ports -> (symbol span, CDM groups, FD code length, TD code length, density per RB)."""
    text = resources.files("nrlink").joinpath("data/csirs_patterns.txt").read_text()
    rows = [tuple(int(v) for v in ln.split()) for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    return {r[0]: r[1:] for r in rows}


CSIRS_PATTERNS = _load_csirs_patterns()


@dataclass(frozen=True)
class CsirsConfig:
    num_ports: int = 1
    num_symbols: int = 1
    start_symbol: int = 0
    start_rb: int = 0
    num_rb: int = 1
    freq_offset: int = 0
    periodicity: Periodicity = Periodicity.PERIODIC
    period_slots: int = 10
    offset_slots: int = 0
    zero_power: bool = False
    tracking_burst: int = 0
    tracking_slots: int = 1
    scrambling_id: int = 0

    def __post_init__(self):
        if not 1 <= self.num_ports <= 32:
            raise DomainError("CSI-RS supports 1..32 ports")
        if self.num_symbols not in (1, 2, 4):
            raise DomainError("CSI-RS spans 1, 2 or 4 symbols")
        if self.tracking_burst:
            if self.tracking_burst not in (2, 4) or self.tracking_slots not in (1, 2):
                raise DomainError("tracking bursts are 2 or 4 symbols over 1 or 2 slots")
            if self.num_ports != 1:
                raise DomainError("tracking CSI-RS uses a single port")
            if self.tracking_burst % self.tracking_slots:
                raise DomainError("burst symbols must split evenly over the slots")
            per_slot = self.tracking_burst // self.tracking_slots
            if self.start_symbol + 4 * (per_slot - 1) >= SYMBOLS_PER_SLOT:
                raise DomainError("tracking burst does not fit the slot")
        elif self.start_symbol + self.num_symbols > SYMBOLS_PER_SLOT:
            raise DomainError("CSI-RS resource extends beyond the slot")


def csirs_occasion(cfg: CsirsConfig, slot: int, triggered: bool = False) -> bool:
    if cfg.periodicity is Periodicity.APERIODIC:
        return triggered
    span = cfg.tracking_slots if cfg.tracking_burst else 1
    return (slot - cfg.offset_slots) % cfg.period_slots < span


def csirs_map(cfg: CsirsConfig, slot: int = 0, triggered: bool = False) -> dict[int, RsMapping]:
    """Per-port CSI-RS REs in ``slot``; values are ``None`` for zero-power resources."""
    if cfg.tracking_burst:
        span, groups, fdl, tdl, density = 1, 1, 1, 1, 3
        per_slot = cfg.tracking_burst // cfg.tracking_slots
        syms = [cfg.start_symbol + 4 * i for i in range(per_slot)]
    else:
        if cfg.num_ports not in CSIRS_PATTERNS:
            raise DomainError(f"no CSI-RS pattern for {cfg.num_ports} ports")
        span, groups, fdl, tdl, density = CSIRS_PATTERNS[cfg.num_ports]
        if span != cfg.num_symbols:
            raise DomainError(
                f"{cfg.num_ports}-port CSI-RS spans {span} symbols, not {cfg.num_symbols}"
            )
        syms = list(range(cfg.start_symbol, cfg.start_symbol + span))
    if not csirs_occasion(cfg, slot, triggered):
        return {}
    if density == 3:
        rel = [cfg.freq_offset % 4 + 4 * i for i in range(3)]
    else:
        rel = [cfg.freq_offset + 2 * g + f for g in range(groups) for f in range(fdl)]
    if max(rel) >= SUBCARRIERS_PER_RB:
        raise DomainError("CSI-RS frequency offset pushes the pattern outside the RB")
    rbs = np.arange(cfg.start_rb, cfg.start_rb + cfg.num_rb)
    local_slot = (slot - cfg.offset_slots) % max(cfg.period_slots, 1)
    out = {}
    cdm = fdl * tdl
    for p in range(cfg.num_ports):
        g, c = divmod(p, cdm)
        wf = _walsh(c % fdl, fdl)
        wt = _walsh(c // fdl, tdl)
        if density == 3:
            cols = rel
            fw = np.ones(3)
        else:
            cols = rel[g * fdl:(g + 1) * fdl]
            fw = wf
        parts = []
        for i, l in enumerate(syms):
            ks = (SUBCARRIERS_PER_RB * rbs[:, None] + np.array(cols)[None, :]).ravel()
            vals = None
            if not cfg.zero_power:
                n_per_rb = len(cols)
                r = qpsk_gold(
                    (2**10 * (SYMBOLS_PER_SLOT * local_slot + l + 1) * (2 * cfg.scrambling_id + 1)
                     + cfg.scrambling_id) % 2**31,
                    n_per_rb * int(rbs[-1] + 1),
                )
                m = (n_per_rb * rbs[:, None] + np.arange(n_per_rb)[None, :]).ravel()
                vals = np.tile(fw, rbs.size) * wt[i % tdl] * r[m]
            parts.append(RsMapping(ks, np.full(ks.size, l), vals))
        out[p] = _stack(parts, with_values=not cfg.zero_power)
    return out


def csirs_reserved_pattern(mapping: dict[int, RsMapping]) -> ReservedPattern:
    """RE-granularity pattern that removes the CSI-RS REs from PDSCH mapping."""
    res = set()
    for m in mapping.values():
        res |= m.re_set()
    return ReservedPattern(Granularity.RE, re_mask=frozenset(res))


@dataclass(frozen=True)
class SrsConfig:
    num_symbols: int = 1
    start_symbol: int = 13
    num_ports: int = 1
    comb: int = 2
    comb_offset: int = 0
    cyclic_shift: int = 0
    start_rb: int = 0
    num_rb: int = 4
    hopping: bool = False
    hop_bandwidth_rb: int = 0
    group: int = 0

    def __post_init__(self):
        if self.num_symbols not in (1, 2, 4):
            raise DomainError("SRS spans 1, 2 or 4 consecutive symbols")
        if self.start_symbol < SYMBOLS_PER_SLOT - 6 or self.start_symbol + self.num_symbols > SYMBOLS_PER_SLOT:
            raise DomainError("SRS symbols must lie within the last 6 symbols of the slot")
        if self.comb not in (2, 4) or not 0 <= self.comb_offset < self.comb:
            raise DomainError("SRS comb must be 2 or 4 with a valid offset")
        if self.num_ports not in (1, 2, 4):
            raise DomainError("SRS supports 1, 2 or 4 ports")
        if (SUBCARRIERS_PER_RB * self.num_rb // self.comb) % 12:
            raise DomainError("SRS sequence length must be a multiple of 12")
        if self.hopping and self.hop_bandwidth_rb < 2 * self.num_rb:
            raise DomainError("hopping bandwidth must cover at least two hops")

    @property
    def max_cyclic_shifts(self) -> int:
        return 8 if self.comb == 2 else 12


def srs_map(cfg: SrsConfig, slot: int = 0) -> dict[int, RsMapping]:
    rb0 = cfg.start_rb
    if cfg.hopping:
        n_hops = cfg.hop_bandwidth_rb // cfg.num_rb
        rb0 += (slot % n_hops) * cfg.num_rb
    msc = SUBCARRIERS_PER_RB * cfg.num_rb // cfg.comb
    ks = SUBCARRIERS_PER_RB * rb0 + cfg.comb_offset + cfg.comb * np.arange(msc)
    syms = range(cfg.start_symbol, cfg.start_symbol + cfg.num_symbols)
    ncs = cfg.max_cyclic_shifts
    out = {}
    for p in range(cfg.num_ports):
        cs = (cfg.cyclic_shift + ncs * p // cfg.num_ports) % ncs
        seq = low_papr_sequence(cfg.group, msc, alpha=2 * np.pi * cs / ncs)
        out[p] = RsMapping(np.tile(ks, len(syms)), np.repeat(list(syms), msc), np.tile(seq, len(syms)))
    return out
