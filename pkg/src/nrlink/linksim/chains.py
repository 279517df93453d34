"""End-to-end PDSCH/PUSCH transmit and receive chains for one slot.

Transmit: TB -> CRC/LDPC -> scrambling -> modulation -> layer mapping ->
RE mapping (DMRS, PTRS, reserved REs) -> OFDM. The channel is a flat
``num_rx x layers`` matrix followed by the sample-level AWGN/CFO/phase-noise
model. The receiver is genie-synchronized and uses DMRS least-squares
estimates, linear in frequency and nearest-DMRS in time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from nrlink.coding.transport import TransportPlan, decode_transport, encode_transport, plan_transport
from nrlink.errors import ConfigError, DomainError
from nrlink.linksim.channel import ChannelConfig, channel_apply, noise_variance
from nrlink.linksim.config import SimConfig
from nrlink.linksim.ofdm import OfdmConfig, ofdm_config, ofdm_demodulate, ofdm_modulate
from nrlink.modulation import (
    LayerMapSpec,
    layer_demap,
    layer_map,
    modulate,
    soft_demod,
    transform_deprecode,
    transform_precode,
)
from nrlink.numerology import (
    SUBCARRIERS_PER_RB,
    Allocation,
    Direction,
    ResourceGrid,
    apply_reserved,
    numerology_params,
)
from nrlink.refsignals import (
    CsirsConfig,
    DmrsConfig,
    PtrsConfig,
    RsMapping,
    SequenceMode,
    csirs_map,
    csirs_reserved_pattern,
    dmrs_map,
    dmrs_symbols,
    ptrs_map,
)
from nrlink.sequences import descramble_llr, scramble

NOISE_FLOOR = 1e-10


def scrambling_c_init(rnti: int, codeword: int, n_id: int) -> int:
    return (rnti * 2**15 + codeword * 2**14 + n_id) % 2**31


@dataclass
class SlotPlan:
    """Everything both link ends derive from the configuration."""

    cfg: SimConfig
    alloc: Allocation
    dmrs_cfg: DmrsConfig
    dmrs: dict[int, RsMapping]
    ptrs: RsMapping | None
    reserved: set
    data_ks: np.ndarray
    data_ls: np.ndarray
    layer_spec: LayerMapSpec
    plans: list[TransportPlan]
    ofdm: OfdmConfig

    @property
    def direction(self) -> Direction:
        return Direction.UL if self.cfg.scenario == "PUSCH" else Direction.DL

    @property
    def num_data_re(self) -> int:
        return int(self.data_ks.size)


def data_re_order(alloc: Allocation, excluded: set) -> tuple[np.ndarray, np.ndarray]:
    """Allocation REs not in ``excluded``, frequency first then time."""
    ks, ls = [], []
    for l in alloc.symbols:
        for k in alloc.subcarriers:
            if (k, l) not in excluded:
                ks.append(k)
                ls.append(l)
    return np.array(ks, dtype=int), np.array(ls, dtype=int)


def _default_tb_size(g: int, rate: float) -> int:
    a = int(g * rate) - 24
    return max(8 * (a // 8), 24)


def build_plan(cfg: SimConfig) -> SlotPlan:
    cfg.validate()
    alloc = Allocation(cfg.start_rb, cfg.num_rb, cfg.start_symbol, cfg.num_symbols)
    dft_s = cfg.scenario == "PUSCH" and cfg.transform_precoding
    try:
        dmrs_cfg = DmrsConfig(
            num_front_symbols=cfg.dmrs_front,
            additional_positions=cfg.dmrs_additional,
            num_ports=cfg.layers,
            sequence_mode=SequenceMode.ZC_LOW_PAPR if dft_s else SequenceMode.GOLD_QPSK,
        )
        dsyms = dmrs_symbols(dmrs_cfg, alloc)
        dmrs = dmrs_map(dmrs_cfg, alloc, cfg.n_id)
        excluded = {(k, l) for l in dsyms for k in alloc.subcarriers}
        ptrs = None
        if cfg.ptrs_enabled:
            ptrs = ptrs_map(PtrsConfig(cfg.ptrs_freq_density, cfg.ptrs_time_density), alloc, dmrs_cfg, cfg.n_id)
            excluded |= ptrs.re_set()
        reserved = set()
        if cfg.zp_csirs:
            free = [l for l in alloc.symbols if l not in dsyms and l != alloc.symbols[-1]]
            zp = csirs_map(CsirsConfig(num_ports=4, start_symbol=free[-1], start_rb=cfg.start_rb,
                                       num_rb=cfg.num_rb, freq_offset=4, zero_power=True))
            pattern = csirs_reserved_pattern(zp)
            reserved = alloc.re_set() - apply_reserved(alloc, pattern)
            excluded |= reserved
        ks, ls = data_re_order(alloc, excluded)
        if dft_s:
            # whole-RB data symbols keep the DFT size a multiple of 12
            counts = np.bincount(ls, minlength=14)
            if any(c % SUBCARRIERS_PER_RB for c in counts if c):
                raise ConfigError("transform precoding needs whole-RB data symbols")
        direction = Direction.UL if cfg.scenario == "PUSCH" else Direction.DL
        ncw = 1 if cfg.layers <= 4 else 2
        layer_spec = LayerMapSpec(ncw, cfg.layers, direction)
        qm = cfg.order.bits_per_symbol
        plans = []
        for nl in layer_spec.layers_per_codeword:
            g = ks.size * qm * nl
            a = cfg.tb_size or _default_tb_size(g, cfg.code_rate)
            plans.append(plan_transport(a, g, qm, cfg.code_rate, 0, nl))
    except DomainError as e:
        raise ConfigError(str(e)) from None
    num = numerology_params(cfg.mu)
    ofdm = ofdm_config(cfg.carrier_num_rb * SUBCARRIERS_PER_RB, num)
    return SlotPlan(cfg, alloc, dmrs_cfg, dmrs, ptrs, reserved, ks, ls, layer_spec, plans, ofdm)


@dataclass
class TxSlot:
    grid: ResourceGrid
    tbs: list[np.ndarray]
    samples: np.ndarray


def transmit(plan: SlotPlan, rng: np.random.Generator) -> TxSlot:
    cfg = plan.cfg
    grid = ResourceGrid(cfg.layers, cfg.carrier_num_rb)
    for p, m in plan.dmrs.items():
        grid.map_array(p, m.ks, m.ls, m.values, "DMRS")
    if plan.ptrs is not None:
        grid.map_array(0, plan.ptrs.ks, plan.ptrs.ls, plan.ptrs.values, "PTRS")
    tbs, cws = [], []
    for q, tp in enumerate(plan.plans):
        tb = rng.integers(0, 2, tp.size_a, dtype=np.uint8)
        bits = scramble(encode_transport(tb, tp), scrambling_c_init(cfg.rnti, q, cfg.n_id))
        tbs.append(tb)
        cws.append(modulate(bits, cfg.order))
    layers = layer_map(cws, plan.layer_spec)
    if cfg.scenario == "PUSCH" and cfg.transform_precoding:
        layers = _per_symbol(layers, plan.data_ls, transform_precode)
    for p in range(cfg.layers):
        grid.map_array(p, plan.data_ks, plan.data_ls, layers[p], "DATA")
    samples = ofdm_modulate(grid, plan.ofdm)
    return TxSlot(grid, tbs, samples)


def _per_symbol(layers: np.ndarray, ls: np.ndarray, fn) -> np.ndarray:
    out = np.array(layers, dtype=complex, copy=True)
    for l in np.unique(ls):
        sel = ls == l
        out[0, sel] = fn(layers[0, sel], int(sel.sum()))
    return out


def channel_matrix(num_rx: int, num_tx: int, rng: np.random.Generator) -> np.ndarray:
    """Identity for a single stream, otherwise a unitary-normalized random mix."""
    if num_rx == num_tx == 1:
        return np.ones((1, 1), complex)
    a = (rng.standard_normal((num_rx, num_tx)) + 1j * rng.standard_normal((num_rx, num_tx))) / np.sqrt(2)
    q, r = np.linalg.qr(a)
    return q[:, :num_tx] * np.exp(1j * np.angle(np.diag(r)))[None, :num_tx]


def estimate_channel(plan: SlotPlan, y: np.ndarray) -> np.ndarray:
    """LS DMRS estimate per (rx, port, subcarrier, symbol) over the allocation."""
    cfg = plan.cfg
    nrx, nsc, nsym = y.shape
    ports = cfg.layers
    h = np.zeros((nrx, ports, nsc, nsym), complex)
    dsyms = dmrs_symbols(plan.dmrs_cfg, plan.alloc)
    nf = plan.dmrs_cfg.num_front_symbols
    groups = [dsyms[i:i + nf] for i in range(0, len(dsyms), nf)]
    k_all = np.array(list(plan.alloc.subcarriers))
    per_group = []
    for grp in groups:
        hg = np.zeros((nrx, ports, k_all.size), complex)
        for p, m in plan.dmrs.items():
            sel = np.isin(m.ls, grp)
            ks, ls, ref = m.ks[sel], m.ls[sel], m.values[sel]
            z = y[:, ks, ls] * np.conj(ref)[None, :]
            if plan.dmrs_cfg.sequence_mode is SequenceMode.ZC_LOW_PAPR:
                kc = ks[ls == grp[0]]
                zc = np.mean(z.reshape(nrx, len(grp), -1), axis=1)
            else:
                # average each CDM block (2 subcarriers x front symbols) to
                # cancel the cover codes of the other ports in the group
                order = np.lexsort((ks, ls))
                ks_o, z_o = ks[order], z[:, order]
                nb = ks_o.size // (2 * len(grp))
                zc = z_o.reshape(nrx, len(grp), nb, 2).mean(axis=(1, 3))
                kc = ks_o[: 2 * nb].reshape(nb, 2).mean(axis=1)
            for r in range(nrx):
                hg[r, p] = np.interp(k_all, kc, zc[r].real) + 1j * np.interp(k_all, kc, zc[r].imag)
        per_group.append(hg)
    centers = np.array([np.mean(g) for g in groups])
    for l in plan.alloc.symbols:
        gi = int(np.argmin(np.abs(centers - l)))
        h[:, :, k_all, l] = per_group[gi]
    return h


def correct_phase(plan: SlotPlan, y: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Remove the common phase error per symbol using PTRS."""
    m = plan.ptrs
    out = y.copy()
    for l in np.unique(m.ls):
        sel = m.ls == l
        ks = m.ks[sel]
        ref = h[:, 0, ks, l] * m.values[sel][None, :]
        phi = np.angle(np.sum(y[:, ks, l] * np.conj(ref)))
        out[:, :, l] *= np.exp(-1j * phi)
    return out


def equalize(y: np.ndarray, h: np.ndarray, nv: float, mmse: bool):
    """Per-RE linear equalizer. ``y`` is ``(n, nrx)``, ``h`` is ``(n, nrx, nl)``.

    Returns symbol estimates ``(n, nl)`` and their noise variances.
    """
    nv = max(nv, NOISE_FLOOR)
    hh = np.conj(np.swapaxes(h, 1, 2))
    gram = hh @ h
    nl = h.shape[2]
    eye = np.eye(nl)[None]
    if mmse:
        inv = np.linalg.inv(gram + nv * eye)
        w = inv @ hh
        x = (w @ y[..., None])[..., 0]
        mu = np.real(np.einsum("nii->ni", w @ h))
        mu = np.clip(mu, 1e-12, 1.0)
        # unbiased estimate: post-equalization SINR is mu / (1 - mu)
        return x / mu, np.clip((1 - mu) / mu, NOISE_FLOOR, None)
    inv = np.linalg.inv(gram)
    x = ((inv @ hh) @ y[..., None])[..., 0]
    var = nv * np.real(np.einsum("nii->ni", inv))
    return x, np.clip(var, NOISE_FLOOR, None)


def receive(plan: SlotPlan, rx: np.ndarray, nv: float) -> list[tuple[np.ndarray, bool]]:
    cfg = plan.cfg
    y = ofdm_demodulate(rx, plan.ofdm)
    h = estimate_channel(plan, y)
    if plan.ptrs is not None:
        y = correct_phase(plan, y, h)
    ks, ls = plan.data_ks, plan.data_ls
    yd = y[:, ks, ls].T
    hd = np.transpose(h[:, :, ks, ls], (2, 0, 1))
    x, var = equalize(yd, hd, nv, cfg.equalizer == "mmse")
    layers, var = x.T, var.T
    if cfg.scenario == "PUSCH" and cfg.transform_precoding:
        layers = _per_symbol(layers, ls, transform_deprecode)
        v = var.copy()
        for l in np.unique(ls):
            sel = ls == l
            v[0, sel] = var[0, sel].mean()
        var = v
    cws = layer_demap(layers, plan.layer_spec)
    vs = layer_demap(var, plan.layer_spec)
    out = []
    for q, (tp, cw, v) in enumerate(zip(plan.plans, cws, vs)):
        llr = soft_demod(cw, cfg.order, np.real(v))
        llr = descramble_llr(llr, scrambling_c_init(cfg.rnti, q, cfg.n_id))
        tb, ok, _ = decode_transport(np.clip(llr, -1e4, 1e4), tp)
        out.append((tb, ok))
    return out


def run_trial(plan: SlotPlan, snr_db: float, rng: np.random.Generator) -> bool:
    """One slot over the channel; ``True`` if any transport block failed."""
    cfg = plan.cfg
    tx = transmit(plan, rng)
    hmat = channel_matrix(cfg.rx_antennas, cfg.layers, rng)
    mixed = hmat @ tx.samples
    power = float(np.mean(np.abs(mixed) ** 2))
    ch = ChannelConfig(snr_db, cfg.cfo_hz, cfg.delay_samples, sample_rate_hz=plan.ofdm.sample_rate_hz,
                       signal_power=power, phase_noise_var=cfg.phase_noise_var)
    rx = channel_apply(mixed, ch, rng)
    # genie synchronization: known delay and CFO
    rx = rx[:, cfg.delay_samples:cfg.delay_samples + plan.ofdm.num_samples]
    if cfg.cfo_hz:
        rx = rx * np.exp(-2j * np.pi * cfg.cfo_hz * (np.arange(rx.shape[1]) + cfg.delay_samples)
                         / plan.ofdm.sample_rate_hz)
    nv = noise_variance(power, snr_db)
    results = receive(plan, rx, nv)
    return any(not ok or not np.array_equal(tb, ref) for (tb, ok), ref in zip(results, tx.tbs))
