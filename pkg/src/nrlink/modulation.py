"""Modulation mapping, soft demodulation, layer mapping, transform precoding."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from nrlink.errors import DomainError
from nrlink.numerology import Direction


class ModOrder(enum.Enum):
    BPSK = 1
    QPSK = 2
    QAM16 = 4
    QAM64 = 6
    QAM256 = 8

    @property
    def bits_per_symbol(self) -> int:
        return self.value

    @classmethod
    def from_name(cls, name: str) -> ModOrder:
        key = name.strip().upper().replace("-", "")
        aliases = {"16QAM": "QAM16", "64QAM": "QAM64", "256QAM": "QAM256"}
        try:
            return cls[aliases.get(key, key)]
        except KeyError:
            raise DomainError(f"unknown modulation {name!r}") from None


def _pam(bits: np.ndarray) -> np.ndarray:
    """Gray PAM level from bits (b0 sign, then nested magnitudes)."""
    m = bits.shape[-1]
    level = np.ones(bits.shape[:-1])
    for i in range(m - 1, 0, -1):
        level = 2 ** (m - i) - (1 - 2.0 * bits[..., i]) * level
    return (1 - 2.0 * bits[..., 0]) * level


@lru_cache(maxsize=None)
def constellation(order: ModOrder) -> np.ndarray:
    """Points indexed by the bit label read MSB-first (b0 b1 ...)."""
    q = order.bits_per_symbol
    labels = (np.arange(2**q)[:, None] >> np.arange(q - 1, -1, -1)) & 1
    if order is ModOrder.BPSK:
        b = labels[:, 0]
        return ((1 - 2.0 * b) + 1j * (1 - 2.0 * b)) / np.sqrt(2)
    pts = _pam(labels[:, 0::2]) + 1j * _pam(labels[:, 1::2])
    return pts / np.sqrt(np.mean(np.abs(pts) ** 2))


@lru_cache(maxsize=None)
def _label_bits(order: ModOrder) -> np.ndarray:
    q = order.bits_per_symbol
    return ((np.arange(2**q)[:, None] >> np.arange(q - 1, -1, -1)) & 1).astype(bool)


def modulate(bits, order: ModOrder) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    q = order.bits_per_symbol
    if bits.size % q:
        raise DomainError(f"{bits.size} bits is not a multiple of {q}")
    idx = bits.reshape(-1, q) @ (1 << np.arange(q - 1, -1, -1))
    return constellation(order)[idx]


def soft_demod(symbols, order: ModOrder, noise_var) -> np.ndarray:
    """Max-log LLRs, positive favoring bit 0. ``noise_var`` may be per symbol."""
    symbols = np.asarray(symbols, dtype=complex).ravel()
    nv = np.broadcast_to(np.asarray(noise_var, dtype=float), symbols.shape)
    if np.any(nv <= 0):
        raise DomainError("noise variance must be positive")
    pts = constellation(order)
    labels = _label_bits(order)
    q = order.bits_per_symbol
    out = np.empty((symbols.size, q))
    chunk = max(1, 2**20 // pts.size)
    for s in range(0, symbols.size, chunk):
        y = symbols[s:s + chunk]
        d = np.abs(y[:, None] - pts[None, :]) ** 2
        for i in range(q):
            d0 = d[:, ~labels[:, i]].min(axis=1)
            d1 = d[:, labels[:, i]].min(axis=1)
            out[s:s + chunk, i] = (d1 - d0) / nv[s:s + chunk]
    return out.ravel()


def hard_decision(llr) -> np.ndarray:
    return (np.asarray(llr) < 0).astype(np.uint8)


@dataclass(frozen=True)
class LayerMapSpec:
    num_codewords: int
    num_layers: int
    direction: Direction = Direction.DL

    def __post_init__(self):
        cw, nl = self.num_codewords, self.num_layers
        if self.direction is Direction.UL:
            if cw != 1:
                raise DomainError("uplink carries a single codeword")
            if not 1 <= nl <= 4:
                raise DomainError("uplink supports 1..4 layers")
        elif self.direction is Direction.DL:
            if not 1 <= nl <= 8:
                raise DomainError("downlink supports 1..8 layers")
            if cw != (1 if nl <= 4 else 2):
                raise DomainError(f"{nl} downlink layers need {1 if nl <= 4 else 2} codeword(s)")
        else:
            raise DomainError("direction must be DL or UL")

    @property
    def layers_per_codeword(self) -> list[int]:
        if self.num_codewords == 1:
            return [self.num_layers]
        return [self.num_layers // 2, self.num_layers - self.num_layers // 2]


def layer_map(codewords, spec: LayerMapSpec) -> np.ndarray:
    """Round-robin codeword symbols onto layers; returns ``(layers, n)``."""
    if isinstance(codewords, np.ndarray) and codewords.ndim == 1:
        codewords = [codewords]
    if len(codewords) != spec.num_codewords:
        raise DomainError(f"expected {spec.num_codewords} codeword(s), got {len(codewords)}")
    out = []
    for cw, nl in zip(codewords, spec.layers_per_codeword):
        cw = np.asarray(cw)
        if cw.size % nl:
            raise DomainError(f"{cw.size} symbols do not split over {nl} layers")
        out.append(cw.reshape(-1, nl).T)
    n = {o.shape[1] for o in out}
    if len(n) != 1:
        raise DomainError("codewords give unequal per-layer lengths")
    return np.concatenate(out, axis=0)


def layer_demap(layers: np.ndarray, spec: LayerMapSpec) -> list[np.ndarray]:
    layers = np.asarray(layers)
    if layers.shape[0] != spec.num_layers:
        raise DomainError("layer count mismatch")
    out, start = [], 0
    for nl in spec.layers_per_codeword:
        out.append(layers[start:start + nl].T.ravel())
        start += nl
    return out


def transform_precode(symbols, m: int) -> np.ndarray:
    """Unitary m-point DFT per block of ``m`` symbols (single layer only)."""
    x = np.asarray(symbols)
    if x.ndim == 2:
        if x.shape[0] != 1:
            raise DomainError("transform precoding applies to single-layer transmission only")
        x = x[0]
    if x.ndim != 1 or x.size % m:
        raise DomainError(f"symbol count must be a multiple of m={m}")
    return (np.fft.fft(x.reshape(-1, m), axis=1) / np.sqrt(m)).ravel()


def transform_deprecode(symbols, m: int) -> np.ndarray:
    x = np.asarray(symbols).ravel()
    if x.size % m:
        raise DomainError(f"symbol count must be a multiple of m={m}")
    return (np.fft.ifft(x.reshape(-1, m), axis=1) * np.sqrt(m)).ravel()
