import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nrlink.errors import DomainError
from nrlink.linksim.channel import ChannelConfig, channel_apply, noise_variance
from nrlink.linksim.ofdm import OfdmConfig, default_fft_size, ofdm_config, ofdm_demodulate, ofdm_modulate, papr_db
from nrlink.numerology import numerology_params


def rand_grid(shape, seed=0):
    rng = np.random.default_rng(seed)
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


@pytest.mark.parametrize("nsc,expect", [(12, 128), (106, 128), (107, 256), (624, 1024), (3276, 4096)])
def test_default_fft_size(nsc, expect):
    assert default_fft_size(nsc) == expect


@given(st.integers(1, 50), st.integers(0, 3), st.integers(1, 3), st.integers(0, 3))
@settings(max_examples=30, deadline=None)
def test_round_trip(nrb, mu, ports, slot):
    cfg = ofdm_config(12 * nrb, numerology_params(mu), slot=slot)
    x = rand_grid((ports, 12 * nrb, 14), nrb)
    y = ofdm_modulate(x, cfg)
    assert y.shape == (ports, cfg.num_samples)
    back = ofdm_demodulate(y, cfg)
    assert np.max(np.abs(back - x)) < 1e-9


def test_single_port_shapes():
    cfg = ofdm_config(24)
    x = rand_grid((24, 14))
    y = ofdm_modulate(x, cfg)
    assert y.shape == (1, cfg.num_samples)
    assert ofdm_demodulate(y[0], cfg).shape == (24, 14)
    assert ofdm_demodulate(y, cfg).shape == (1, 24, 14)


def test_cyclic_prefix_structure():
    cfg = ofdm_config(48, fft_size=128)
    assert cfg.cp_samples[0] == 10 and cfg.cp_samples[1] == 9
    y = ofdm_modulate(rand_grid((48, 14)), cfg)[0]
    for start, cp in zip(cfg.symbol_starts(), cfg.cp_samples):
        np.testing.assert_allclose(y[start - cp:start], y[start + 128 - cp:start + 128])
    # one slot at 15 kHz lasts 1 ms
    assert cfg.num_samples == 128 * 15


def test_unitary_scaling_and_centring():
    cfg = ofdm_config(12, fft_size=128, num_symbols=1)
    x = np.zeros((12, 1), complex)
    x[6, 0] = 1.0  # DC bin
    y = ofdm_modulate(x, cfg)[0, cfg.cp_samples[0]:]
    np.testing.assert_allclose(y, np.full(128, 1 / np.sqrt(128)))
    g = rand_grid((12, 1))
    assert np.sum(np.abs(ofdm_modulate(g, cfg)[0, cfg.cp_samples[0]:]) ** 2) == pytest.approx(np.sum(np.abs(g) ** 2))


def test_demodulate_with_offset_and_errors():
    cfg = ofdm_config(36)
    x = rand_grid((36, 14))
    y = np.concatenate([np.zeros(17), ofdm_modulate(x, cfg)[0]])
    np.testing.assert_allclose(ofdm_demodulate(y, cfg, offset=17), x, atol=1e-9)
    with pytest.raises(DomainError):
        ofdm_demodulate(y[:100], cfg)
    with pytest.raises(DomainError):
        ofdm_modulate(rand_grid((36, 13)), cfg)
    with pytest.raises(DomainError):
        OfdmConfig(12, 100)
    with pytest.raises(DomainError):
        OfdmConfig(300, 256)


def test_papr_of_constant_envelope():
    n = np.arange(64)
    assert papr_db(np.exp(2j * np.pi * 3 * n / 64)) == pytest.approx(0.0, abs=1e-12)
    assert papr_db(np.r_[1.0, np.zeros(3)]) == pytest.approx(10 * math.log10(4))


def test_channel_identity():
    x = rand_grid(100)
    np.testing.assert_array_equal(channel_apply(x, ChannelConfig()), x)


def test_channel_delay_and_tail():
    x = rand_grid(50)
    y = channel_apply(x, ChannelConfig(delay_samples=7, tail_samples=3))
    assert y.size == 60 and not y[:7].any() and not y[-3:].any()
    np.testing.assert_array_equal(y[7:57], x)
    y2 = channel_apply(np.stack([x, x]), ChannelConfig(delay_samples=2))
    assert y2.shape == (2, 52)


def test_channel_cfo_rotation():
    x = np.ones(1000, complex)
    y = channel_apply(x, ChannelConfig(cfo_hz=150.0, sample_rate_hz=30e3))
    np.testing.assert_allclose(np.angle(y[1:] * np.conj(y[:-1])), 2 * np.pi * 150 / 30e3)


@pytest.mark.parametrize("snr", [-6.0, 0.0, 10.0])
def test_channel_noise_variance(snr):
    x = rand_grid(200_000) * 0.5
    p = float(np.mean(np.abs(x) ** 2))
    y = channel_apply(x, ChannelConfig(snr_db=snr, seed=4))
    measured = float(np.mean(np.abs(y - x) ** 2))
    assert measured == pytest.approx(noise_variance(p, snr), rel=0.02)
    y = channel_apply(x, ChannelConfig(snr_db=snr, signal_power=1.0, seed=4))
    assert float(np.mean(np.abs(y - x) ** 2)) == pytest.approx(10 ** (-snr / 10), rel=0.02)


def test_phase_noise_keeps_envelope():
    x = np.ones(5000, complex)
    y = channel_apply(x, ChannelConfig(phase_noise_var=1e-4, seed=1))
    np.testing.assert_allclose(np.abs(y), 1.0)
    d = np.angle(y[1:] * np.conj(y[:-1]))
    assert np.var(d) == pytest.approx(1e-4, rel=0.1)


def test_channel_seeding():
    x = rand_grid(100)
    a = channel_apply(x, ChannelConfig(snr_db=0, seed=5))
    b = channel_apply(x, ChannelConfig(snr_db=0, seed=5))
    c = channel_apply(x, ChannelConfig(snr_db=0, seed=6))
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)
    d = channel_apply(x, ChannelConfig(snr_db=0, seed=99), np.random.default_rng(5))
    np.testing.assert_array_equal(a, d)


def test_channel_errors():
    with pytest.raises(DomainError):
        ChannelConfig(delay_samples=-1)
    with pytest.raises(DomainError):
        ChannelConfig(phase_noise_var=-1.0)
    with pytest.raises(DomainError):
        channel_apply(np.array([np.nan]), ChannelConfig())
