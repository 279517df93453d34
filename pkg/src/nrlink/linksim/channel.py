"""AWGN channel with integer delay, carrier frequency offset and phase noise."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from nrlink.errors import DomainError


@dataclass(frozen=True)
class ChannelConfig:
    """``snr_db = inf`` disables noise. SNR is relative to the mean input
    power unless ``signal_power`` is given. ``phase_noise_var`` is the
    per-sample increment variance (rad^2) of a Wiener phase process."""

    snr_db: float = math.inf
    cfo_hz: float = 0.0
    delay_samples: int = 0
    seed: int = 0
    sample_rate_hz: float = 15e3 * 2048
    signal_power: float | None = None
    phase_noise_var: float = 0.0
    tail_samples: int = 0

    def __post_init__(self):
        if self.delay_samples < 0 or self.tail_samples < 0:
            raise DomainError("delay must be non-negative")
        if self.phase_noise_var < 0:
            raise DomainError("phase-noise variance must be non-negative")


def noise_variance(signal_power: float, snr_db: float) -> float:
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    return signal_power / 10 ** (snr_db / 10)


def complex_noise(rng: np.random.Generator, shape, var: float) -> np.ndarray:
    return np.sqrt(var / 2) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def channel_apply(samples, ch: ChannelConfig, rng: np.random.Generator | None = None) -> np.ndarray:
    """Delay (zero-prepend), CFO rotation, phase noise and AWGN along the last axis."""
    x = np.asarray(samples, dtype=complex)
    if not np.all(np.isfinite(x)):
        raise DomainError("input samples must be finite")
    rng = rng if rng is not None else np.random.default_rng(ch.seed)
    pad = [(0, 0)] * (x.ndim - 1) + [(ch.delay_samples, ch.tail_samples)]
    y = np.pad(x, pad) if ch.delay_samples or ch.tail_samples else x.copy()
    n = y.shape[-1]
    if ch.cfo_hz:
        y = y * np.exp(2j * np.pi * ch.cfo_hz * np.arange(n) / ch.sample_rate_hz)
    if ch.phase_noise_var:
        phase = np.cumsum(rng.normal(0.0, math.sqrt(ch.phase_noise_var), n))
        y = y * np.exp(1j * phase)
    power = ch.signal_power if ch.signal_power is not None else float(np.mean(np.abs(x) ** 2))
    var = noise_variance(power, ch.snr_db)
    if var:
        y = y + complex_noise(rng, y.shape, var)
    return y
