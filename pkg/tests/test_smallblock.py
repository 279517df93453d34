import itertools

import numpy as np
import pytest

from nrlink.coding.smallblock import codebook, generator, small_block_decode, small_block_encode
from nrlink.errors import DomainError


def rm25_span():
    """Row space of RM(2,5): constant, 5 linear and 10 quadratic monomials."""
    x = np.array(list(itertools.product((0, 1), repeat=5)), dtype=np.int64).T
    rows = [np.ones(32, np.int64)] + list(x) + [x[i] * x[j] for i, j in itertools.combinations(range(5), 2)]
    return np.array(rows) % 2


def gf2_rank(m):
    m = m.copy() % 2
    r = 0
    for c in range(m.shape[1]):
        piv = [i for i in range(r, m.shape[0]) if m[i, c]]
        if not piv:
            continue
        m[[r, piv[0]]] = m[[piv[0], r]]
        for i in range(m.shape[0]):
            if i != r and m[i, c]:
                m[i] ^= m[r]
        r += 1
    return r


def test_generator_is_rm_subcode():
    g = generator().astype(np.int64)
    assert g.shape == (11, 32)
    assert gf2_rank(g) == 11
    span = rm25_span()
    assert gf2_rank(np.vstack([span, g])) == gf2_rank(span)


@pytest.mark.parametrize("k", range(1, 12))
def test_minimum_distance_by_enumeration(k):
    g = generator()[:k].astype(np.int64)
    weights = [int((np.array(m) @ g % 2).sum()) for m in itertools.product((0, 1), repeat=k) if any(m)]
    assert min(weights) >= 12
    assert codebook(k).shape == (2**k, 32)


@pytest.mark.parametrize("k", range(1, 12))
def test_exhaustive_round_trip(k):
    for m in itertools.product((0, 1), repeat=k):
        bits = np.array(m, np.uint8)
        cw = small_block_encode(bits)
        np.testing.assert_array_equal(small_block_decode(10.0 * (1 - 2.0 * cw), k), bits)


@pytest.mark.parametrize("e", [16, 32, 48, 100])
def test_repetition_and_truncation(e):
    bits = np.array([1, 0, 1, 1, 0, 0, 1], np.uint8)
    base = small_block_encode(bits)
    cw = small_block_encode(bits, e)
    np.testing.assert_array_equal(cw, base[np.arange(e) % 32])
    if e >= 32:
        np.testing.assert_array_equal(small_block_decode(1 - 2.0 * cw, 7), bits)


def test_corrects_five_errors():
    rng = np.random.default_rng(0)
    bits = rng.integers(0, 2, 11).astype(np.uint8)
    llr = 1 - 2.0 * small_block_encode(bits)
    llr[rng.choice(32, 5, replace=False)] *= -1
    np.testing.assert_array_equal(small_block_decode(llr, 11), bits)


def test_rejects_bad_k():
    with pytest.raises(DomainError):
        small_block_encode(np.zeros(12, np.uint8))
    with pytest.raises(DomainError):
        small_block_decode(np.zeros(32), 0)
