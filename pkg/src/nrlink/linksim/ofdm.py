"""CP-OFDM modulation and demodulation with a unitary FFT convention."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from nrlink.errors import DomainError
from nrlink.numerology import SYMBOLS_PER_SLOT, Numerology, ResourceGrid, numerology_params


def default_fft_size(num_subcarriers: int) -> int:
    """Smallest power of two holding ``1.2 * num_subcarriers`` (at least 128)."""
    n = 128
    while n < 1.2 * num_subcarriers:
        n *= 2
    return n


@dataclass(frozen=True)
class OfdmConfig:
    num_subcarriers: int
    fft_size: int
    numerology: Numerology = field(default_factory=lambda: numerology_params(0))
    cp_samples: tuple[int, ...] = ()

    def __post_init__(self):
        if self.fft_size & (self.fft_size - 1) or self.fft_size < 2:
            raise DomainError("fft_size must be a power of two")
        if self.fft_size < self.num_subcarriers:
            raise DomainError(f"fft_size {self.fft_size} < {self.num_subcarriers} subcarriers")
        if not self.cp_samples:
            object.__setattr__(
                self, "cp_samples", tuple(self.numerology.slot_cp_samples(self.fft_size))
            )
        if any(c < 0 or c > self.fft_size for c in self.cp_samples):
            raise DomainError("cyclic prefix lengths must lie in [0, fft_size]")

    @property
    def sample_rate_hz(self) -> float:
        return self.fft_size * self.numerology.scs_hz

    @property
    def num_symbols(self) -> int:
        return len(self.cp_samples)

    @property
    def num_samples(self) -> int:
        return sum(self.cp_samples) + self.num_symbols * self.fft_size

    def symbol_starts(self) -> np.ndarray:
        """Sample index of each symbol's useful part (after its CP)."""
        lens = np.array(self.cp_samples) + self.fft_size
        return np.concatenate([[0], np.cumsum(lens)[:-1]]) + np.array(self.cp_samples)

    @property
    def bins(self) -> np.ndarray:
        """FFT bin of each active subcarrier, centred on DC."""
        k = np.arange(self.num_subcarriers) - self.num_subcarriers // 2
        return k % self.fft_size


def ofdm_config(num_subcarriers: int, numerology: Numerology | None = None, num_symbols: int = SYMBOLS_PER_SLOT,
                slot: int = 0, fft_size: int | None = None) -> OfdmConfig:
    num = numerology or numerology_params(0)
    n = fft_size or default_fft_size(num_subcarriers)
    first = (slot % num.slots_per_subframe) * SYMBOLS_PER_SLOT
    cps = tuple(num.cp_samples(n, (first + l) % num.symbols_per_subframe) for l in range(num_symbols))
    return OfdmConfig(num_subcarriers, n, num, cps)


def _as_array(grid) -> np.ndarray:
    if isinstance(grid, ResourceGrid):
        return grid.values
    arr = np.asarray(grid, dtype=complex)
    return arr[None] if arr.ndim == 2 else arr


def ofdm_modulate(grid, cfg: OfdmConfig) -> np.ndarray:
    """``(ports, nsc, nsym)`` grid (or a 2-D single-port grid) to ``(ports, samples)``."""
    x = _as_array(grid)
    ports, nsc, nsym = x.shape
    if nsc != cfg.num_subcarriers or nsym != cfg.num_symbols:
        raise DomainError(f"grid {nsc}x{nsym} does not match config {cfg.num_subcarriers}x{cfg.num_symbols}")
    n = cfg.fft_size
    freq = np.zeros((ports, n, nsym), dtype=complex)
    freq[:, cfg.bins, :] = x
    t = np.fft.ifft(freq, axis=1) * np.sqrt(n)
    out = []
    for l, cp in enumerate(cfg.cp_samples):
        sym = t[:, :, l]
        out.append(sym[:, n - cp:])
        out.append(sym)
    return np.concatenate(out, axis=1)


def ofdm_demodulate(samples, cfg: OfdmConfig, offset: int = 0) -> np.ndarray:
    """Inverse of :func:`ofdm_modulate`; ``offset`` skips leading samples."""
    y = np.asarray(samples, dtype=complex)
    single = y.ndim == 1
    if single:
        y = y[None]
    need = offset + cfg.num_samples
    if y.shape[1] < need:
        raise DomainError(f"need {need} samples, got {y.shape[1]}")
    n = cfg.fft_size
    idx = offset + cfg.symbol_starts()[:, None] + np.arange(n)[None, :]
    blocks = y[:, idx]  # (ports, nsym, n)
    f = np.fft.fft(blocks, axis=2) / np.sqrt(n)
    out = np.transpose(f[:, :, cfg.bins], (0, 2, 1))
    return out[0] if single else out


def papr_db(samples, axis=-1) -> np.ndarray:
    x = np.abs(np.asarray(samples)) ** 2
    return 10 * np.log10(x.max(axis=axis) / x.mean(axis=axis))
