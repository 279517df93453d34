"""Monte-Carlo harness: per-trial RNG streams, optional process parallelism."""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from nrlink.access.cellsearch import DEFAULT_FFT, CellSearchConfig, cell_search, nominal_cp, ssb_capture
from nrlink.access.prach import ZoneConfig, detect_prach, generate_prach, num_zones, prach_format, preamble_shift
from nrlink.linksim.channel import ChannelConfig, channel_apply
from nrlink.linksim.config import SimConfig
from nrlink.sequences import NUM_PCI

SSB_SAMPLES = 4 * (DEFAULT_FFT + nominal_cp(DEFAULT_FFT))


@dataclass
class SnrPoint:
    snr_db: float
    trials: int
    errors: int
    detections: int = 0
    false_alarms: int = 0
    elapsed_s: float = 0.0

    def __post_init__(self):
        if not 0 <= self.errors <= self.trials:
            raise ValueError("errors must lie in [0, trials]")

    @property
    def rate(self) -> float:
        return self.errors / self.trials


@dataclass
class SimResult:
    scenario: str
    points: list[SnrPoint] = field(default_factory=list)


def trial_rng(seed: int, point: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, point, trial]))


def _cell_search_trial(cfg: SimConfig, snr: float, rng) -> tuple[bool, bool, bool]:
    pci = int(rng.integers(NUM_PCI))
    delay = int(rng.integers(0, cfg.capture_len - SSB_SAMPLES + 1))
    x = ssb_capture(pci, delay, cfg.capture_len, cfg.scs_khz)
    power = float(np.mean(np.abs(x[delay:delay + SSB_SAMPLES]) ** 2))
    y = channel_apply(x, ChannelConfig(snr, cfg.cfo_hz, sample_rate_hz=DEFAULT_FFT * cfg.scs_khz * 1e3,
                                       signal_power=power), rng)
    res = cell_search(y, cfg.scs_khz, CellSearchConfig())
    detected = res is not None
    ok = detected and res.pci.pci == pci and abs(res.timing_offset_samples - delay) <= nominal_cp(DEFAULT_FFT) // 2
    return not ok, detected, detected and not ok


def _prach_trial(cfg: SimConfig, snr: float, rng) -> tuple[bool, bool, bool]:
    fmt = prach_format(cfg.prach_format)
    zone = ZoneConfig(cfg.prach_ncs)
    v = int(rng.integers(num_zones(fmt, zone)))
    zone_len = max(int(zone.ncs * fmt.fft_size / fmt.seq_len) if zone.ncs else fmt.cp_samples, 1)
    delay = int(rng.integers(0, min(zone_len, fmt.cp_samples) - 1)) if zone_len > 2 else 0
    x = generate_prach(fmt, cfg.prach_root, preamble_shift(v, fmt, zone))
    power = float(np.mean(np.abs(x) ** 2))
    y = channel_apply(x, ChannelConfig(snr, delay_samples=delay, signal_power=power, tail_samples=zone_len), rng)
    dets = detect_prach(y, fmt, cfg.prach_root, zone)
    hit = any(d.preamble_index == v for d in dets)
    return not hit, hit, any(d.preamble_index != v for d in dets)


def _run_chunk(cfg: SimConfig, point: int, snr: float, trials: list[int]) -> tuple[int, int, int]:
    errors = detections = false_alarms = 0
    if cfg.scenario in ("PDSCH", "PUSCH"):
        from nrlink.linksim.chains import build_plan, run_trial

        plan = build_plan(cfg)

        def one(rng):
            err = run_trial(plan, snr, rng)
            return err, not err, False
    elif cfg.scenario == "CELL_SEARCH":
        def one(rng):
            return _cell_search_trial(cfg, snr, rng)
    else:
        def one(rng):
            return _prach_trial(cfg, snr, rng)
    for t in trials:
        e, d, f = one(trial_rng(cfg.seed, point, t))
        errors += bool(e)
        detections += bool(d)
        false_alarms += bool(f)
    return errors, detections, false_alarms


def run_scenario(cfg: SimConfig) -> SimResult:
    """Run every SNR point; results do not depend on ``cfg.workers``."""
    cfg.validate()
    if cfg.scenario in ("PDSCH", "PUSCH"):
        from nrlink.linksim.chains import build_plan

        build_plan(cfg)  # report configuration errors before any trial runs
    result = SimResult(cfg.scenario)
    pool = ProcessPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    try:
        for i, snr in enumerate(cfg.snr_db):
            start = time.perf_counter()
            ids = list(range(cfg.trials))
            if pool is None:
                parts = [_run_chunk(cfg, i, snr, ids)]
            else:
                chunks = [ids[w::cfg.workers] for w in range(cfg.workers)]
                parts = list(pool.map(_run_chunk, [cfg] * len(chunks), [i] * len(chunks),
                                      [snr] * len(chunks), chunks))
            e, d, f = (sum(p[j] for p in parts) for j in range(3))
            elapsed = time.perf_counter() - start if cfg.record_timing else 0.0
            result.points.append(SnrPoint(float(snr), cfg.trials, e, d, f, elapsed))
    finally:
        if pool is not None:
            pool.shutdown()
    return result
