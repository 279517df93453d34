import itertools

import numpy as np
import pytest

from nrlink.control.pdcch import (
    AGGREGATION_LEVELS,
    CceMapping,
    Coreset,
    PdcchCandidate,
    Reg,
    SearchSpace,
    assemble_pdcch,
    blind_search,
    candidate_first_cce,
    cce_to_regs,
    map_pdcch,
    search_candidates,
)
from nrlink.errors import DomainError
from nrlink.numerology import ResourceGrid

IL, NIL = CceMapping.INTERLEAVED, CceMapping.NON_INTERLEAVED


def coreset_matrix():
    out = []
    for nrb, nsym in itertools.product((6, 12, 24, 48, 96), (1, 2, 3)):
        if (nrb * nsym) % 6:
            continue
        rbs = tuple(range(0, 2 * nrb, 2))  # non-contiguous
        out.append(Coreset(rbs, nsym, NIL))
        for lb, rows, shift in itertools.product((2, 3, 6), (2, 3, 6), (0, 5)):
            if lb % nsym or ((nrb * nsym) // lb) % rows:
                continue
            out.append(Coreset(rbs, nsym, IL, lb, rows, shift))
    return out


def interleaver_oracle(cs):
    """Bundle permutation ``f(x) = (r C + c + shift) mod (N/L)`` for ``x = c R + r``."""
    nb = cs.num_regs // cs.bundle_size
    if cs.mapping is NIL:
        return list(range(nb))
    big_r = cs.rows
    big_c = nb // big_r
    f = [0] * nb
    for c in range(big_c):
        for r in range(big_r):
            f[c * big_r + r] = (r * big_c + c + cs.shift) % nb
    return f


def test_matrix_is_nontrivial():
    cs = coreset_matrix()
    assert len(cs) > 40
    assert sum(c.mapping is IL for c in cs) > 30


@pytest.mark.parametrize("cs", coreset_matrix(), ids=lambda c: f"{len(c.rb_set)}x{c.num_symbols}-{c.mapping.value[:3]}-{c.bundle_size}-{c.rows}-{c.shift}")
def test_cce_to_reg_bijection(cs):
    used = [r for c in range(cs.num_cces) for r in cce_to_regs(cs, c)]
    everything = {Reg(rb, s) for rb in cs.rb_set for s in range(cs.num_symbols)}
    assert len(used) == cs.num_regs == len(everything)
    assert set(used) == everything
    np.testing.assert_array_equal(cs.bundle_permutation(), interleaver_oracle(cs))


def test_numbers_from_constants():
    cs = Coreset(tuple(range(48)), 1)
    assert cs.num_regs == 48 and cs.num_cces == 8
    assert cce_to_regs(cs, 0) == [Reg(rb, 0) for rb in range(6)]
    cs2 = Coreset(tuple(range(6)), 3)
    # time-first numbering inside the RB
    assert cce_to_regs(cs2, 0) == [Reg(0, 0), Reg(0, 1), Reg(0, 2), Reg(1, 0), Reg(1, 1), Reg(1, 2)]
    with pytest.raises(DomainError):
        cce_to_regs(cs, 8)


def test_coreset_validation():
    with pytest.raises(DomainError):
        Coreset((0, 1, 2, 3, 4, 5), 4)
    with pytest.raises(DomainError):
        Coreset(tuple(range(5)), 1)
    with pytest.raises(DomainError):
        Coreset(tuple(range(12)), 2, IL, bundle_size=3)
    with pytest.raises(DomainError):
        Coreset(tuple(range(6)), 1, IL, bundle_size=2, rows=2)
    with pytest.raises(DomainError):
        PdcchCandidate(3, 0, 1)


def test_candidate_hash_formula():
    for rnti, lvl, m, mm, n in [(1, 1, 0, 2, 8), (0x4601, 4, 1, 2, 16), (65535, 2, 3, 4, 24)]:
        y = (39827 * rnti) % 65537
        assert candidate_first_cce(rnti, lvl, m, mm, n) == lvl * ((y + (m * n) // (lvl * mm)) % (n // lvl))


def test_candidates_are_distinct_and_aligned():
    cs = Coreset(tuple(range(96)), 1)
    for rnti in (1, 100, 0xBEEF):
        cands = search_candidates(cs, SearchSpace({1: 6, 2: 6, 4: 2, 8: 2, 16: 1}), rnti)
        for c in cands:
            assert c.first_cce % c.aggregation_level == 0
            assert c.first_cce + c.aggregation_level <= cs.num_cces
        keys = [(c.aggregation_level, c.first_cce) for c in cands]
        assert len(keys) == len(set(keys))


@pytest.mark.parametrize("lvl", AGGREGATION_LEVELS)
def test_assembled_re_counts(lvl):
    cs = Coreset(tuple(range(48)), 2, IL, 6, 2, 1)
    m = assemble_pdcch(np.ones(40, np.uint8), PdcchCandidate(lvl, 0, 7, 0), cs)
    assert len(m) == 72 * lvl
    assert m.is_dmrs.sum() == 18 * lvl
    assert len(set(zip(m.ks.tolist(), m.ls.tolist()))) == 72 * lvl
    again = assemble_pdcch(np.ones(40, np.uint8), PdcchCandidate(lvl, 0, 7, 0), cs)
    np.testing.assert_array_equal(m.values, again.values)


def test_payload_too_large():
    cs = Coreset(tuple(range(6)), 1)
    with pytest.raises(DomainError):
        assemble_pdcch(np.ones(100, np.uint8), PdcchCandidate(1, 0, 1, 0), cs)


def grid_with(cs, cands, payloads, nid=5):
    g = ResourceGrid(1, max(cs.rb_set) + 1)
    for c, p in zip(cands, payloads):
        map_pdcch(g, assemble_pdcch(p, c, cs, nid))
    return g


def test_blind_search_every_level():
    cs = Coreset(tuple(range(48)), 2, IL, 6, 2, 3)
    ss = SearchSpace({1: 2, 2: 2, 4: 2, 8: 1, 16: 1})
    rnti = 0x1234
    rng = np.random.default_rng(0)
    for cand in search_candidates(cs, ss, rnti):
        payload = rng.integers(0, 2, 39).astype(np.uint8)
        g = grid_with(cs, [cand], [payload])
        found = blind_search(g, cs, ss, rnti, 39, nid=5)
        hits = [d for d in found if d.aggregation_level == cand.aggregation_level and d.first_cce == cand.first_cce]
        assert hits and np.array_equal(hits[0].payload, payload)
        assert blind_search(g, cs, ss, rnti ^ 0x0101, 39, nid=5) == []


def test_blind_search_empty_and_noise():
    cs = Coreset(tuple(range(24)), 1)
    ss = SearchSpace({1: 4, 2: 2, 4: 1})
    assert blind_search(ResourceGrid(1, 24), cs, ss, 9, 30) == []
    rng = np.random.default_rng(2)
    false = 0
    for _ in range(20):
        noise = (rng.normal(size=(1, 288, 14)) + 1j * rng.normal(size=(1, 288, 14))) / np.sqrt(2)
        false += len(blind_search(noise, cs, ss, 9, 30))
    assert false == 0
