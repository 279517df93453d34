"""Cyclic redundancy checks with zero-initialized registers.

Polynomials are written MSB-first without the leading ``D^L`` term.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from nrlink.errors import DomainError

POLYS = {
    "24A": (24, 0x864CFB),
    "24B": (24, 0x800063),
    "24C": (24, 0xB2B117),
    "16": (16, 0x1021),
    "11": (11, 0x621),
    "6": (6, 0x21),
}

# CRC chosen by length when only a length is known
BY_LENGTH = {24: "24C", 16: "16", 11: "11", 6: "6"}


def _poly(poly_id: str) -> tuple[int, int]:
    try:
        return POLYS[poly_id]
    except KeyError:
        raise DomainError(f"unknown CRC polynomial {poly_id!r}") from None


@lru_cache(maxsize=None)
def _table(poly_id: str) -> tuple[int, ...]:
    width, poly = _poly(poly_id)
    top = 1 << (width - 1)
    mask = (1 << width) - 1
    table = []
    for byte in range(256):
        reg = 0
        for i in range(7, -1, -1):
            fb = bool(reg & top) ^ bool((byte >> i) & 1)
            reg = (reg << 1) & mask
            if fb:
                reg ^= poly
        table.append(reg)
    return tuple(table)


def crc_remainder(bits, poly_id: str) -> np.ndarray:
    """CRC parity bits of ``bits`` (MSB of the register first)."""
    width, _ = _poly(poly_id)
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    # leading zeros do not move a zero-initialized register, so pad to bytes
    pad = (-bits.size) % 8
    data = np.packbits(np.concatenate([np.zeros(pad, np.uint8), bits])).tolist()
    table = _table(poly_id)
    mask = (1 << width) - 1
    reg = 0
    if width >= 8:
        shift = width - 8
        for b in data:
            reg = ((reg << 8) & mask) ^ table[((reg >> shift) ^ b) & 0xFF]
    else:
        # short registers: feed the byte through bit by bit
        _, poly = _poly(poly_id)
        top = 1 << (width - 1)
        for b in data:
            for i in range(7, -1, -1):
                fb = bool(reg & top) ^ bool((b >> i) & 1)
                reg = (reg << 1) & mask
                if fb:
                    reg ^= poly
    return np.array([(reg >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)


def crc_attach(bits, poly_id: str) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    if bits.size == 0:
        raise DomainError("cannot attach a CRC to an empty payload")
    return np.concatenate([bits, crc_remainder(bits, poly_id)])


def crc_check(bits, poly_id: str) -> bool:
    width, _ = _poly(poly_id)
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    if bits.size <= width:
        return False
    return not crc_remainder(bits, poly_id).any()


@lru_cache(maxsize=64)
def syndrome_matrix(n: int, poly_id: str) -> np.ndarray:
    """``(n, width)`` matrix ``M`` with ``crc_remainder(x) = x @ M mod 2``.

    Used to check many candidate words at once.
    """
    width, _ = _poly(poly_id)
    m = np.zeros((n, width), dtype=np.uint8)
    e = np.zeros(n, dtype=np.uint8)
    for i in range(n):
        e[i] = 1
        m[i] = crc_remainder(e, poly_id)
        e[i] = 0
    return m


def crc_check_batch(words: np.ndarray, poly_id: str) -> np.ndarray:
    """Vectorized :func:`crc_check` over the last axis of ``words``."""
    words = np.asarray(words, dtype=np.uint8)
    m = syndrome_matrix(words.shape[-1], poly_id)
    syn = (words.astype(np.int32) @ m.astype(np.int32)) & 1
    return ~syn.any(axis=-1)
