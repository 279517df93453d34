"""Initial cell search: PSS timing/CFO acquisition, SSS identity detection.

The receiver correlates the capture against time-domain PSS replicas for
the three ``nid2`` values over a grid of frequency-offset hypotheses, then
refines the CFO from the phase drift between the two PSS halves, and
finally correlates the SSS symbol against the 336 ``nid1`` candidates
using the PSS as a channel reference.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from nrlink.access.ssb import SSB_SUBCARRIERS, SSB_SYMBOLS, build_ssb, decode_pbch, ssb_layout
from nrlink.errors import DomainError
from nrlink.linksim.ofdm import OfdmConfig, ofdm_modulate
from nrlink.numerology import numerology_for_scs
from nrlink.sequences import NUM_PCI, CellId, pss_sequence, sss_table

DEFAULT_FFT = 512
# calibrated on pure-noise captures of 7680 samples (one 15 kHz slot at
# fft 512) for a 0.1% false-alarm target; see calibrate_thresholds
PSS_THRESHOLD = 0.034
SSS_THRESHOLD = 0.30


def nominal_cp(fft_size: int) -> int:
    return 144 * fft_size // 2048


@dataclass(frozen=True)
class CellSearchConfig:
    fft_size: int = DEFAULT_FFT
    cfo_grid: tuple[float, ...] = tuple(np.round(np.arange(-4, 5) * 0.125, 3))
    integer_cfo: tuple[int, ...] = (0,)
    raster_offsets: tuple[int, ...] = (0,)
    pss_threshold: float = PSS_THRESHOLD
    sss_threshold: float = SSS_THRESHOLD
    decode_pbch: bool = False

    def __post_init__(self):
        if self.fft_size < SSB_SUBCARRIERS or self.fft_size & (self.fft_size - 1):
            raise DomainError("fft_size must be a power of two >= 240")


@dataclass(frozen=True)
class CellSearchResult:
    pci: CellId
    timing_offset_samples: int
    cfo_hz: float
    metric: float
    sss_metric: float = 0.0
    raster_offset: int = 0
    pbch_payload: np.ndarray | None = None
    pbch_ok: bool | None = None
    ssb_index: int | None = None


def _ssb_bins(fft_size: int, raster: int = 0) -> np.ndarray:
    return (np.arange(SSB_SUBCARRIERS) - SSB_SUBCARRIERS // 2 + raster) % fft_size


def ssb_ofdm_config(fft_size: int = DEFAULT_FFT, scs_khz: int = 15, num_symbols: int = SSB_SYMBOLS) -> OfdmConfig:
    """SSB-wide carrier with a nominal (non-extended) CP on every symbol."""
    return OfdmConfig(SSB_SUBCARRIERS, fft_size, numerology_for_scs(scs_khz),
                      (nominal_cp(fft_size),) * num_symbols)


def ssb_capture(pci: CellId | int, delay: int = 0, total_len: int | None = None, scs_khz: int = 15,
                fft_size: int = DEFAULT_FFT, ssb_index: int = 0, payload=None) -> np.ndarray:
    """Noise-free capture holding one SSB whose PSS CP starts at ``delay``."""
    blk = build_ssb(pci, payload, ssb_index)
    x = ofdm_modulate(blk.grid.T, ssb_ofdm_config(fft_size, scs_khz))[0]
    total = total_len if total_len is not None else delay + x.size
    if delay + x.size > total:
        raise DomainError("capture too short for the requested delay")
    out = np.zeros(total, complex)
    out[delay:delay + x.size] = x
    return out


def _pss_replica(nid2: int, fft_size: int, raster: int) -> np.ndarray:
    freq = np.zeros(fft_size, complex)
    freq[_ssb_bins(fft_size, raster)[56:183]] = pss_sequence(nid2)
    return np.fft.ifft(freq) * np.sqrt(fft_size)


def _window_energy(y: np.ndarray, n: int) -> np.ndarray:
    c = np.concatenate([[0.0], np.cumsum(np.abs(y) ** 2)])
    return c[n:] - c[:-n]


def _pss_stage(y: np.ndarray, cfg: CellSearchConfig, last_start: int):
    """Best ``(metric, t, nid2, raster, shift)`` over all hypotheses."""
    n = cfg.fft_size
    size = 1 << int(np.ceil(np.log2(y.size + n)))
    yf = np.fft.fft(y, size)
    energy = _window_energy(y, n)[: last_start + 1]
    # floor keeps silent (all-zero) stretches from producing spurious peaks
    energy = np.maximum(energy, 1e-6 * max(float(energy.mean()), 1e-30))
    t_idx = np.arange(n)
    best = (-1.0, 0, 0, 0, 0.0)
    for raster in cfg.raster_offsets:
        for nid2 in range(3):
            base = _pss_replica(nid2, n, raster)
            e_ref = float(np.sum(np.abs(base) ** 2))
            for ic in cfg.integer_cfo:
                for frac in cfg.cfo_grid:
                    shift = ic + frac
                    r = base * np.exp(2j * np.pi * shift * t_idx / n)
                    rf = np.fft.fft(r, size)
                    corr = np.fft.ifft(yf * np.conj(rf))[: last_start + 1]
                    metric = np.abs(corr) ** 2 / (energy * e_ref)
                    t = int(np.argmax(metric))
                    if metric[t] > best[0]:
                        best = (float(metric[t]), t, nid2, raster, shift)
    return best


def _grid_at(y: np.ndarray, start: int, fft_size: int, raster: int) -> np.ndarray:
    seg = y[start:start + fft_size]
    return (np.fft.fft(seg) / np.sqrt(fft_size))[_ssb_bins(fft_size, raster)]


def cell_search(iq, scs_khz: int = 15, search_cfg: CellSearchConfig | None = None) -> CellSearchResult | None:
    """Detect the strongest cell in ``iq``; ``None`` if no hypothesis passes.

    ``timing_offset_samples`` is the first sample of the PSS symbol's CP.
    """
    cfg = search_cfg or CellSearchConfig()
    y = np.asarray(iq, dtype=complex).ravel()
    n = cfg.fft_size
    cp = nominal_cp(n)
    sym = n + cp
    last_start = y.size - (2 * sym + n)
    if last_start < cp:
        return None
    metric, t, nid2, raster, shift = _pss_stage(y, cfg, last_start)
    if metric < cfg.pss_threshold or t < cp:
        return None
    # fine CFO from the two PSS halves after coarse derotation
    idx = np.arange(y.size)
    yd = y * np.exp(-2j * np.pi * shift * idx / n)
    r = _pss_replica(nid2, n, raster)
    h = n // 2
    c1 = np.vdot(r[:h], yd[t:t + h])
    c2 = np.vdot(r[h:], yd[t + h:t + n])
    shift += np.angle(c2 * np.conj(c1)) / (2 * np.pi * h) * n
    yd = y * np.exp(-2j * np.pi * shift * idx / n)
    g_pss = _grid_at(yd, t, n, raster)
    g_sss = _grid_at(yd, t + 2 * sym, n, raster)
    pss = pss_sequence(nid2)
    h_pss = g_pss[56:183] * pss
    h_est = np.convolve(h_pss, np.ones(7) / 7, mode="same")
    z = g_sss[56:183] * np.conj(h_est)
    cands = sss_table()[nid2::3]  # row i is pci 3*i + nid2
    scores = np.abs(cands @ z)
    nid1 = int(np.argmax(scores))
    sss_metric = float(scores[nid1] / (np.sqrt(127) * max(np.linalg.norm(z), 1e-30)))
    if sss_metric < cfg.sss_threshold:
        return None
    pci = CellId.from_parts(nid1, nid2)
    scs_hz = numerology_for_scs(scs_khz).scs_hz
    res = CellSearchResult(pci, t - cp, float(shift * scs_hz), metric, sss_metric, raster)
    if cfg.decode_pbch:
        grid = np.stack([_grid_at(yd, t + i * sym, n, raster) for i in range(SSB_SYMBOLS)])
        # common phase from the PSS-derived channel
        grid = grid * np.exp(-1j * np.angle(h_pss.sum()))
        payload, ok, idx_ssb = decode_pbch(grid, pci)
        res = replace(res, pbch_payload=payload, pbch_ok=ok, ssb_index=idx_ssb)
    return res


def search_metrics(iq, search_cfg: CellSearchConfig | None = None) -> tuple[float, float]:
    """Raw PSS and SSS metrics without thresholding (used for calibration)."""
    cfg = replace(search_cfg or CellSearchConfig(), pss_threshold=-1.0, sss_threshold=-1.0,
                  decode_pbch=False)
    res = cell_search(iq, 15, cfg)
    return (res.metric, res.sss_metric) if res else (0.0, 0.0)


def calibrate_thresholds(num_trials: int = 1000, capture_len: int = 7680, target_pfa: float = 1e-3,
                         seed: int = 0, search_cfg: CellSearchConfig | None = None) -> tuple[float, float]:
    """Thresholds as the ``1 - target_pfa`` quantiles of pure-noise metrics."""
    rng = np.random.default_rng(seed)
    m = np.array([
        search_metrics((rng.standard_normal(capture_len) + 1j * rng.standard_normal(capture_len)) / np.sqrt(2),
                       search_cfg)
        for _ in range(num_trials)
    ])
    return tuple(float(np.quantile(m[:, i], 1 - target_pfa)) for i in range(2))
