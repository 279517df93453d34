import dataclasses

import numpy as np
import pytest

from nrlink.coding.transport import encode_transport
from nrlink.errors import ConfigError
from nrlink.linksim.chains import (
    build_plan,
    channel_matrix,
    data_re_order,
    equalize,
    receive,
    run_trial,
    scrambling_c_init,
    transmit,
)
from nrlink.linksim.config import SimConfig
from nrlink.linksim.ofdm import ofdm_demodulate
from nrlink.modulation import modulate
from nrlink.numerology import Allocation
from nrlink.sequences import scramble

CONFIGS = [
    SimConfig("PDSCH"),
    SimConfig("PDSCH", modulation="16QAM", num_rb=8, start_rb=2, carrier_rb=12),
    SimConfig("PDSCH", modulation="256QAM", code_rate=0.8, num_rb=6),
    SimConfig("PDSCH", layers=2, dmrs_additional=0),
    SimConfig("PDSCH", layers=6, num_rb=4, modulation="64QAM"),
    SimConfig("PDSCH", ptrs_enabled=True, zp_csirs=True),
    SimConfig("PDSCH", mu=1, start_symbol=2, num_symbols=10, dmrs_front=2),
    SimConfig("PDSCH", tb_size=5000, num_rb=30, modulation="64QAM", code_rate=0.6),
    SimConfig("PUSCH"),
    SimConfig("PUSCH", transform_precoding=True, modulation="16QAM"),
    SimConfig("PUSCH", layers=2, num_rx=4),
]


def frozen_rng(seed):
    return np.random.default_rng(seed)


@pytest.mark.parametrize("cfg", CONFIGS, ids=lambda c: f"{c.scenario}-{c.modulation}-L{c.layers}-{c.num_rb}rb")
def test_noiseless_chain_is_error_free(cfg):
    plan = build_plan(dataclasses.replace(cfg))
    rng = frozen_rng(1)
    for _ in range(3):
        assert run_trial(plan, float("inf"), rng) is False


def test_scrambling_init():
    assert scrambling_c_init(0x4601, 1, 7) == (0x4601 * 2**15 + 2**14 + 7) % 2**31


def test_data_order_is_frequency_first():
    alloc = Allocation(1, 2, 3, 4)
    ks, ls = data_re_order(alloc, {(12, 3), (20, 4)})
    assert ks.size == 24 * 4 - 2
    keys = list(zip(ls.tolist(), ks.tolist()))
    assert keys == sorted(keys)
    assert (12, 3) not in set(zip(ks.tolist(), ls.tolist()))


def test_frequency_first_probe_on_grid():
    """Codeword symbol i lands on the i-th free RE counted frequency first."""
    cfg = SimConfig("PDSCH", num_rb=3, start_rb=1, carrier_rb=5, ptrs_enabled=True)
    plan = build_plan(cfg)
    tx = transmit(plan, frozen_rng(4))
    tp = plan.plans[0]
    bits = scramble(encode_transport(tx.tbs[0], tp), scrambling_c_init(cfg.rnti, 0, cfg.n_id))
    expect = modulate(bits, cfg.order)
    alloc = plan.alloc
    got = []
    for l in alloc.symbols:
        for k in alloc.subcarriers:
            if tx.grid.tag_at(k, l) == "DATA":
                got.append(tx.grid.values[0, k, l])
    np.testing.assert_allclose(got, expect)
    assert tx.grid.tag_at(alloc.subcarriers[0], 0) == "DMRS"


def test_receiver_on_clean_grid():
    plan = build_plan(SimConfig("PDSCH", layers=2))
    tx = transmit(plan, frozen_rng(0))
    out = receive(plan, tx.samples, 0.0)
    for (tb, ok), ref in zip(out, tx.tbs):
        assert ok and np.array_equal(tb, ref)
    grid = ofdm_demodulate(tx.samples, plan.ofdm)
    np.testing.assert_allclose(grid, tx.grid.values, atol=1e-9)


def test_channel_matrix_is_unitary():
    rng = frozen_rng(3)
    assert channel_matrix(1, 1, rng) == np.ones((1, 1))
    h = channel_matrix(4, 2, rng)
    np.testing.assert_allclose(h.conj().T @ h, np.eye(2), atol=1e-12)


def test_equalizers_invert_known_channel():
    rng = frozen_rng(5)
    h = rng.normal(size=(50, 3, 2)) + 1j * rng.normal(size=(50, 3, 2))
    x = rng.normal(size=(50, 2)) + 1j * rng.normal(size=(50, 2))
    y = (h @ x[..., None])[..., 0]
    for mmse in (False, True):
        xe, var = equalize(y, h, 1e-12, mmse)
        np.testing.assert_allclose(xe, x, atol=1e-6)
        assert np.all(var > 0)


def test_bler_falls_with_snr():
    plan = build_plan(SimConfig("PDSCH", num_rb=4, code_rate=0.5))
    rng = frozen_rng(7)
    low = sum(run_trial(plan, -2.0, rng) for _ in range(20))
    high = sum(run_trial(plan, 8.0, rng) for _ in range(20))
    assert low > high and high == 0


def test_chain_with_impairments():
    cfg = SimConfig("PDSCH", cfo_hz=300.0, delay_samples=40, phase_noise_var=1e-5, ptrs_enabled=True)
    plan = build_plan(cfg)
    rng = frozen_rng(2)
    assert sum(run_trial(plan, 20.0, rng) for _ in range(5)) == 0


def papr_percentile_db(samples_list, plan, q=99.9):
    """``q``-th percentile of instantaneous over mean power across symbols."""
    cfg = plan.ofdm
    vals = []
    for s in samples_list:
        for start in cfg.symbol_starts():
            p = np.abs(s[0, start:start + cfg.fft_size]) ** 2
            vals.append(p / p.mean())
    return 10 * np.log10(np.percentile(np.concatenate(vals), q))


def test_dft_s_ofdm_papr_advantage():
    base = SimConfig("PUSCH", num_rb=12, modulation="QPSK")
    plans = [build_plan(base), build_plan(dataclasses.replace(base, transform_precoding=True))]
    rng = frozen_rng(11)
    cp, dft = ([transmit(p, rng).samples for _ in range(40)] for p in plans)
    gain = papr_percentile_db(cp, plans[0]) - papr_percentile_db(dft, plans[1])
    assert gain >= 0.5


@pytest.mark.parametrize("kw", [
    dict(scenario="PUSCH", transform_precoding=True, ptrs_enabled=True),
    dict(scenario="PUSCH", transform_precoding=True, layers=2, num_rx=2),
    dict(scenario="PDSCH", transform_precoding=True),
    dict(scenario="PUSCH", layers=5, num_rx=5),
    dict(scenario="PDSCH", layers=8, num_rx=8),
    dict(scenario="PDSCH", layers=2, num_rx=1),
    dict(modulation="8PSK"),
    dict(code_rate=1.0),
    dict(start_rb=10, num_rb=5, carrier_rb=12),
    dict(start_symbol=10, num_symbols=5),
    dict(equalizer="ml"),
    dict(scenario="PBCH"),
    dict(trials=0),
    dict(snr_db=()),
])
def test_invalid_configs(kw):
    with pytest.raises(ConfigError):
        build_plan(SimConfig(**kw))


def test_plan_errors_become_config_errors():
    # too few symbols for the requested DMRS pattern
    with pytest.raises(ConfigError):
        build_plan(SimConfig(num_symbols=4, dmrs_front=2, dmrs_additional=3))
