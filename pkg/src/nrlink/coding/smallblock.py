"""Reed-Muller-type (32, K<=11) block code for short UCI payloads."""

from __future__ import annotations

import itertools
from functools import lru_cache
from importlib import resources

import numpy as np

from nrlink.errors import DomainError

MAX_PAYLOAD = 11
BASE_LEN = 32


@lru_cache(maxsize=None)
def generator() -> np.ndarray:
    text = resources.files("nrlink").joinpath("data/smallblock_32_11.txt").read_text()
    rows = [[int(c) for c in ln.strip()] for ln in text.splitlines() if ln and not ln.startswith("#")]
    return np.array(rows, dtype=np.uint8)


def _check_k(k: int) -> None:
    if not 1 <= k <= MAX_PAYLOAD:
        raise DomainError(f"small block code carries 1..{MAX_PAYLOAD} bits, got {k}")


@lru_cache(maxsize=None)
def codebook(k: int) -> np.ndarray:
    """All ``2**k`` base codewords, row index = payload value (MSB first)."""
    _check_k(k)
    msgs = np.array(list(itertools.product((0, 1), repeat=k)), dtype=np.int32)
    return (msgs @ generator()[:k].astype(np.int32) % 2).astype(np.uint8)


def design_distance(k: int) -> int:
    cb = codebook(k)
    return int(cb[1:].sum(axis=1).min())


def small_block_encode(bits, e: int = BASE_LEN) -> np.ndarray:
    """Encode and circularly repeat/truncate the 32-bit word to ``e`` bits."""
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    _check_k(bits.size)
    word = bits.astype(np.int32) @ generator()[:bits.size].astype(np.int32) % 2
    return word.astype(np.uint8)[np.arange(e) % BASE_LEN]


def small_block_decode(llr, k: int) -> np.ndarray:
    """Maximum-likelihood decoding by correlating against every codeword."""
    _check_k(k)
    llr = np.asarray(llr, dtype=float).ravel()
    folded = np.bincount(np.arange(llr.size) % BASE_LEN, weights=llr, minlength=BASE_LEN)
    scores = (1.0 - 2.0 * codebook(k)) @ folded
    best = int(np.argmax(scores))
    return np.array([(best >> (k - 1 - i)) & 1 for i in range(k)], dtype=np.uint8)
