import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nrlink.coding.crc import crc_check
from nrlink.coding.ldpc import BaseGraphId
from nrlink.coding.transport import (
    RateMatchSpec,
    bit_deinterleave,
    bit_interleave,
    circular_buffer_size,
    decode_transport,
    desegment,
    encode_transport,
    filler_mask,
    k0,
    plan_transport,
    rate_match,
    rate_recover,
    segment,
    segmentation_params,
)
from nrlink.errors import DomainError

BG1, BG2 = BaseGraphId.BG1, BaseGraphId.BG2


def rate_match_oracle(d, e, start, fillers):
    out, k, j = [], 0, 0
    ncb = d.size
    while k < e:
        pos = (start + j) % ncb
        if not fillers[pos]:
            out.append(d[pos])
            k += 1
        j += 1
    return np.array(out)


def interleave_oracle(e_bits, qm):
    n = e_bits.size
    f = np.empty_like(e_bits)
    for j in range(n // qm):
        for i in range(qm):
            f[i + j * qm] = e_bits[i * (n // qm) + j]
    return f


@pytest.mark.parametrize("b,bg,expect", [
    (8448, BG1, (1, 0, 8448, 384)),
    (8449, BG1, (2, 24, 4249, 208)),
    (3840, BG2, (1, 0, 3840, 384)),
    (3841, BG2, (2, 24, 1945, 208)),
    (100, BG2, (1, 0, 100, 18)),
    (600, BG2, (1, 0, 600, 72)),
])
def test_segmentation_params(b, bg, expect):
    assert segmentation_params(b, bg) == expect


def test_k0_positions():
    z = 10
    assert [k0(BG1, z, rv) for rv in range(4)] == [0, 17 * z, 33 * z, 56 * z]
    assert [k0(BG2, z, rv) for rv in range(4)] == [0, 13 * z, 25 * z, 43 * z]
    assert circular_buffer_size(BG1, z) == 66 * z


def test_segment_then_desegment():
    rng = np.random.default_rng(0)
    bits = rng.integers(0, 2, 9000).astype(np.uint8)
    blocks = segment(bits, BG1)
    assert len(blocks) == 2
    for cb in blocks:
        assert crc_check(cb.bits[:cb.k_prime], "24B")
        assert cb.k == 22 * cb.lifting_size
        assert not cb.bits[cb.k_prime:].any()
    np.testing.assert_array_equal(desegment([cb.bits[:cb.k_prime] for cb in blocks], True), bits)


@pytest.mark.parametrize("rv", range(4))
@pytest.mark.parametrize("e", [50, 300, 1500])
def test_rate_match_matches_loop(rv, e):
    z = 20
    ncb = circular_buffer_size(BG2, z)
    d = np.random.default_rng(rv).integers(0, 2, ncb).astype(np.uint8)
    fillers = filler_mask(BG2, z, 150)
    got = rate_match(d, RateMatchSpec(e, rv), BG2, z, fillers)
    np.testing.assert_array_equal(got, rate_match_oracle(d, e, k0(BG2, z, rv), fillers))


def test_rate_recover_accumulates_repetitions():
    z = 2
    ncb = circular_buffer_size(BG2, z)
    spec = RateMatchSpec(2 * ncb, 0)
    full = rate_recover(np.ones(2 * ncb), spec, BG2, z)
    np.testing.assert_array_equal(full[:2 * z], 0)
    np.testing.assert_array_equal(full[2 * z:], 2)


@pytest.mark.parametrize("qm", [1, 2, 4, 6, 8])
def test_bit_interleaver_matches_loop(qm):
    e = np.arange(24 * qm)
    np.testing.assert_array_equal(bit_interleave(e, qm), interleave_oracle(e, qm))
    np.testing.assert_array_equal(bit_deinterleave(bit_interleave(e, qm), qm), e)


def test_bit_interleaver_rejects_ragged():
    with pytest.raises(DomainError):
        bit_interleave(np.zeros(7), 2)
    with pytest.raises(DomainError):
        RateMatchSpec(10, 4)


@pytest.mark.parametrize("size_a,rate,qm,layers,num_cb,bg", [
    (120, 0.5, 2, 1, 1, BG2),
    (1000, 0.8, 4, 2, 1, BG1),
    (9000, 0.6, 6, 1, 2, BG1),
    (5000, 0.2, 2, 1, 2, BG2),
    (20000, 0.9, 8, 4, 3, BG1),
])
def test_transport_round_trip(size_a, rate, qm, layers, num_cb, bg):
    unit = qm * layers
    g = unit * math.ceil(size_a / rate / unit)
    plan = plan_transport(size_a, g, qm, rate, num_layers=layers)
    assert plan.bg is bg and plan.num_cb == num_cb
    assert plan.g == g
    tb = np.random.default_rng(size_a).integers(0, 2, size_a).astype(np.uint8)
    coded = encode_transport(tb, plan)
    assert coded.size == g
    out, ok, cb_ok = decode_transport(20.0 * (1 - 2.0 * coded), plan)
    assert ok and np.all(cb_ok)
    np.testing.assert_array_equal(out, tb)


@given(st.integers(24, 4000), st.integers(1, 3))
@settings(max_examples=15, deadline=None)
def test_e_split_is_exact(size_a, rv):
    qm, layers = 4, 2
    g = 8 * (size_a // 2 + 16)
    plan = plan_transport(size_a, g, qm, 0.6, rv=rv, num_layers=layers)
    assert sum(plan.e) == g
    assert all(e % (qm * layers) == 0 for e in plan.e)
    assert max(plan.e) - min(plan.e) <= qm * layers


def test_transport_detects_corruption():
    plan = plan_transport(500, 1200, 2, 0.4)
    tb = np.ones(500, np.uint8)
    llr = 20.0 * (1 - 2.0 * encode_transport(tb, plan))
    llr[::2] *= -1
    _, ok, _ = decode_transport(llr, plan, max_iters=5)
    assert not ok
    with pytest.raises(DomainError):
        decode_transport(llr[:-1], plan)


@given(st.sampled_from([(300, 0.3), (2000, 0.5), (5000, 0.2), (9000, 0.7)]), st.integers(0, 3), st.sampled_from([2, 4]))
@settings(max_examples=16, deadline=None)
def test_round_trip_every_redundancy_version(case, rv, qm):
    # e covers the whole circular buffer, so any starting point k0 recovers the word
    size_a, rate = case
    probe = plan_transport(size_a, qm * 64, qm, rate)
    n_cb = (66 if probe.bg is BG1 else 50) * probe.lifting_size
    g = qm * math.ceil(1.02 * n_cb * probe.num_cb / qm)
    plan = plan_transport(size_a, g, qm, rate, rv=rv)
    assert min(plan.e) >= n_cb
    tb = np.random.default_rng(rv + size_a).integers(0, 2, size_a).astype(np.uint8)
    out, ok, _ = decode_transport(15.0 * (1 - 2.0 * encode_transport(tb, plan)), plan)
    assert ok
    np.testing.assert_array_equal(out, tb)
