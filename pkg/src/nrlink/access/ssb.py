"""SS/PBCH block composition, PBCH coding and burst-set positions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from nrlink.coding.polar import PolarSpec, polar_decode, polar_encode
from nrlink.errors import DomainError
from nrlink.modulation import ModOrder, modulate, soft_demod
from nrlink.numerology import SYMBOLS_PER_SLOT, ResourceGrid, numerology_for_scs
from nrlink.sequences import CellId, descramble_llr, pss_sequence, qpsk_gold, scramble, sss_sequence

SSB_SUBCARRIERS = 240
SSB_SYMBOLS = 4
SSB_RB = SSB_SUBCARRIERS // 12
PSS_SSS_START = 56
PBCH_PAYLOAD_LEN = 32
PBCH_E = 864
MAX_SSB = {15: 8, 30: 8, 120: 64, 240: 64}
BURST_PERIODS_MS = (5, 10, 20, 40, 80, 160)
HALF_FRAME_MS = 5.0


@dataclass(frozen=True)
class SsbConfig:
    scs_khz: int = 15
    burst_periodicity_ms: int = 20
    num_ssb: int = 1
    frequency_offset_rb: int = 0
    case: str | None = None
    pbch_payload_len: int = PBCH_PAYLOAD_LEN

    def __post_init__(self):
        if self.scs_khz not in MAX_SSB:
            raise DomainError("SSB subcarrier spacing must be 15 or 30 kHz (FR1) or 120/240 kHz (FR2)")
        if not 1 <= self.num_ssb <= 64:
            raise DomainError("num_ssb must be in 1..64")
        if self.burst_periodicity_ms not in BURST_PERIODS_MS:
            raise DomainError(f"burst periodicity must be one of {BURST_PERIODS_MS} ms")
        if self.frequency_offset_rb < 0:
            raise DomainError("SSB frequency offset must be non-negative")
        if not 1 <= self.pbch_payload_len <= PBCH_E // 2 - 24:
            raise DomainError("PBCH payload size out of range")
        if self.case is not None and self.case not in _CASES:
            raise DomainError(f"unknown SSB case {self.case!r}")

    @property
    def burst_case(self) -> str:
        return self.case or {15: "A", 30: "C", 120: "D", 240: "E"}[self.scs_khz]


# case -> (scs, first symbols within a block, block period in symbols, block indices)
_CASES = {
    "A": (15, (2, 8), 14, (0, 1, 2, 3)),
    "B": (30, (4, 8, 16, 20), 28, (0, 1)),
    "C": (30, (2, 8), 14, (0, 1, 2, 3)),
    "D": (120, (4, 8, 16, 20), 28,
          (0, 1, 2, 3, 5, 6, 7, 8, 10, 11, 12, 13, 15, 16, 17, 18)),
    "E": (240, (8, 12, 16, 20, 32, 36, 40, 44), 56, (0, 1, 2, 3, 5, 6, 7, 8)),
}


def burst_positions(cfg: SsbConfig) -> list[tuple[int, int]]:
    """``(slot, start_symbol)`` of each SSB index within the half-frame."""
    scs, firsts, period, blocks = _CASES[cfg.burst_case]
    if scs != cfg.scs_khz:
        raise DomainError(f"case {cfg.burst_case} is defined for {scs} kHz")
    if cfg.num_ssb > MAX_SSB[cfg.scs_khz]:
        raise DomainError(f"at most {MAX_SSB[cfg.scs_khz]} SSBs at {cfg.scs_khz} kHz")
    starts = sorted(f + period * n for n in blocks for f in firsts)[: cfg.num_ssb]
    return [divmod(s, SYMBOLS_PER_SLOT) for s in starts]


def burst_times_ms(cfg: SsbConfig) -> list[float]:
    """Start time of each SSB relative to the burst period start."""
    slot_ms = 1.0 / numerology_for_scs(cfg.scs_khz).slots_per_subframe
    return [(slot + sym / SYMBOLS_PER_SLOT) * slot_ms for slot, sym in burst_positions(cfg)]


@dataclass(frozen=True)
class SsBlock:
    grid: np.ndarray  # (4 symbols, 240 subcarriers)
    pci: CellId
    ssb_index: int
    pbch_payload: np.ndarray


def ssb_layout(pci: CellId | int) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """RE coordinates ``(k, l)`` of every SSB channel; PBCH data in mapping order."""
    v = int(pci) % 4 if not isinstance(pci, CellId) else pci.pci % 4
    pss_k = np.arange(PSS_SSS_START, PSS_SSS_START + 127)
    full = np.arange(SSB_SUBCARRIERS)
    side = np.concatenate([np.arange(48), np.arange(192, 240)])
    dm_k, dm_l, pb_k, pb_l = [], [], [], []
    for l, ks in ((1, full), (2, side), (3, full)):
        is_dmrs = ks % 4 == v
        dm_k.append(ks[is_dmrs])
        dm_l.append(np.full(is_dmrs.sum(), l))
        pb_k.append(ks[~is_dmrs])
        pb_l.append(np.full((~is_dmrs).sum(), l))
    return {
        "PSS": (pss_k, np.zeros(127, int)),
        "SSS": (pss_k, np.full(127, 2)),
        "PBCH_DMRS": (np.concatenate(dm_k), np.concatenate(dm_l)),
        "PBCH": (np.concatenate(pb_k), np.concatenate(pb_l)),
    }


def pbch_dmrs(pci: CellId, ssb_index: int) -> np.ndarray:
    i = ssb_index % 8
    c_init = 2**11 * (i + 1) * (pci.pci // 4 + 1) + 2**6 * (i + 1) + pci.pci % 4
    return qpsk_gold(c_init, 144)


def _pbch_spec(payload_len: int, list_size: int = 8) -> PolarSpec:
    return PolarSpec(payload_len, PBCH_E, crc_len=24, list_size=list_size)


def pbch_encode(payload, pci: CellId) -> np.ndarray:
    bits = polar_encode(payload, _pbch_spec(len(payload)))
    return modulate(scramble(bits, pci.pci), ModOrder.QPSK)


def build_ssb(pci: CellId | int, payload=None, ssb_index: int = 0,
              payload_len: int = PBCH_PAYLOAD_LEN) -> SsBlock:
    pci = pci if isinstance(pci, CellId) else CellId(int(pci))
    if not 0 <= ssb_index < 64:
        raise DomainError("ssb_index must be in 0..63")
    payload = np.zeros(payload_len, np.uint8) if payload is None else np.asarray(payload, np.uint8).ravel()
    if payload.size != payload_len:
        raise DomainError(f"PBCH payload must be {payload_len} bits, got {payload.size}")
    lay = ssb_layout(pci)
    g = ResourceGrid(1, SSB_RB, SSB_SYMBOLS)
    g.map_array(0, *lay["PSS"], pss_sequence(pci.nid2), "PSS")
    g.map_array(0, *lay["SSS"], sss_sequence(pci), "SSS")
    g.map_array(0, *lay["PBCH_DMRS"], pbch_dmrs(pci, ssb_index), "PBCH_DMRS")
    g.map_array(0, *lay["PBCH"], pbch_encode(payload, pci), "PBCH")
    return SsBlock(g.values[0].T.copy(), pci, ssb_index, payload)


def _interp_channel(k_pilot, h_pilot, k_out) -> np.ndarray:
    return np.interp(k_out, k_pilot, h_pilot.real) + 1j * np.interp(k_out, k_pilot, h_pilot.imag)


def detect_ssb_index(grid: np.ndarray, pci: CellId, candidates=range(8)) -> int:
    """Pick the PBCH DMRS hypothesis with the largest coherent correlation."""
    k, l = ssb_layout(pci)["PBCH_DMRS"]
    y = grid[l, k]
    scores = []
    for i in candidates:
        z = y * np.conj(pbch_dmrs(pci, i))
        # coherent over short runs to tolerate residual phase slopes
        scores.append(np.abs(z.reshape(-1, 12).sum(axis=1)).sum())
    return list(candidates)[int(np.argmax(scores))]


def decode_pbch(grid: np.ndarray, pci: CellId | int, ssb_index: int | None = None,
                noise_var: float | None = None, payload_len: int = PBCH_PAYLOAD_LEN,
                list_size: int = 8):
    """Equalize with the PBCH DMRS and polar-decode.

    Returns ``(payload, crc_ok, ssb_index)``. ``ssb_index`` is blindly
    detected (lower 3 bits) when not given.
    """
    pci = pci if isinstance(pci, CellId) else CellId(int(pci))
    grid = np.asarray(grid)
    if grid.shape != (SSB_SYMBOLS, SSB_SUBCARRIERS):
        raise DomainError("SSB grid must be 4 x 240")
    if ssb_index is None:
        ssb_index = detect_ssb_index(grid, pci)
    lay = ssb_layout(pci)
    dk, dl = lay["PBCH_DMRS"]
    h_ls = grid[dl, dk] * np.conj(pbch_dmrs(pci, ssb_index))
    pk, pl = lay["PBCH"]
    h = np.empty(pk.size, complex)
    for l in (1, 2, 3):
        sel_d, sel_p = dl == l, pl == l
        h[sel_p] = _interp_channel(dk[sel_d], h_ls[sel_d], pk[sel_p])
    if noise_var is None:
        # residual of the pilots after a short smoothing
        sm = np.convolve(h_ls, np.ones(3) / 3, mode="same")
        noise_var = max(float(np.mean(np.abs(h_ls - sm)[1:-1] ** 2)) * 1.5, 1e-6)
    y = grid[pl, pk]
    eq = y * np.conj(h) / np.maximum(np.abs(h) ** 2, 1e-12)
    nv = noise_var / np.maximum(np.abs(h) ** 2, 1e-12)
    llr = descramble_llr(soft_demod(eq, ModOrder.QPSK, nv), pci.pci)
    payload, ok = polar_decode(llr, _pbch_spec(payload_len, list_size))
    return payload, bool(ok), ssb_index
