"""Simulation configuration and its flat ``key = value`` file format.

Lines look like ``section.key = value``; ``#`` starts a comment. A dotted
key ``a.b`` sets field ``a_b`` if it exists, else field ``b``. Lists are
comma-separated. Example::

    scenario = PDSCH
    alloc.num_rb = 24
    mcs.modulation = 16QAM
    mcs.code_rate = 0.5
    dmrs.additional = 1
    sim.snr_db = 0, 2, 4
    sim.trials = 200
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

from nrlink.errors import ConfigError
from nrlink.modulation import ModOrder

SCENARIOS = ("PDSCH", "PUSCH", "CELL_SEARCH", "PRACH")


@dataclass
class SimConfig:
    scenario: str = "PDSCH"
    mu: int = 0
    carrier_rb: int = 0
    start_rb: int = 0
    num_rb: int = 12
    start_symbol: int = 0
    num_symbols: int = 14
    modulation: str = "QPSK"
    code_rate: float = 0.5
    tb_size: int = 0
    layers: int = 1
    num_rx: int = 0
    dmrs_front: int = 1
    dmrs_additional: int = 1
    ptrs_enabled: bool = False
    ptrs_freq_density: int = 2
    ptrs_time_density: int = 1
    zp_csirs: bool = False
    transform_precoding: bool = False
    equalizer: str = "mmse"
    snr_db: tuple[float, ...] = (10.0,)
    trials: int = 100
    seed: int = 0
    workers: int = 1
    rnti: int = 0x4601
    n_id: int = 0
    cfo_hz: float = 0.0
    delay_samples: int = 0
    phase_noise_var: float = 0.0
    scs_khz: int = 15
    capture_len: int = 7680
    prach_format: str = "0"
    prach_root: int = 25
    prach_ncs: int = 13
    record_timing: bool = False

    @property
    def carrier_num_rb(self) -> int:
        return self.carrier_rb or self.start_rb + self.num_rb

    @property
    def rx_antennas(self) -> int:
        return self.num_rx or self.layers

    @property
    def order(self) -> ModOrder:
        return ModOrder.from_name(self.modulation)

    def validate(self) -> SimConfig:
        s = self.scenario = self.scenario.upper()
        if s not in SCENARIOS:
            raise ConfigError(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        if self.trials < 1 or self.workers < 1:
            raise ConfigError("trials and workers must be positive")
        if not self.snr_db:
            raise ConfigError("at least one SNR point is required")
        if s in ("PDSCH", "PUSCH"):
            try:
                self.order
            except ValueError as e:
                raise ConfigError(str(e)) from None
            if not 0 < self.code_rate < 1:
                raise ConfigError("code rate must lie in (0, 1)")
            if self.start_rb + self.num_rb > self.carrier_num_rb:
                raise ConfigError("allocation exceeds the carrier")
            if self.start_symbol + self.num_symbols > 14:
                raise ConfigError("allocation exceeds the slot")
            if self.rx_antennas < self.layers:
                raise ConfigError("need at least as many receive antennas as layers")
            if s == "PUSCH":
                if self.layers > 4:
                    raise ConfigError("uplink carries a single codeword on at most 4 layers")
                if self.transform_precoding and self.layers != 1:
                    raise ConfigError("transform precoding is single-layer only")
                if self.transform_precoding and self.ptrs_enabled:
                    raise ConfigError("PTRS is not modeled with transform precoding")
            else:
                if self.transform_precoding:
                    raise ConfigError("transform precoding is an uplink option")
                if self.layers > 8:
                    raise ConfigError("downlink supports at most 8 layers")
            if self.layers > 6 and self.dmrs_front != 2:
                raise ConfigError("more than 6 layers need dmrs.front = 2")
            if self.equalizer not in ("zf", "mmse"):
                raise ConfigError("equalizer must be zf or mmse")
        if self.delay_samples < 0:
            raise ConfigError("delay must be non-negative")
        return self


def _convert(text: str, ftype, name: str):
    text = text.strip()
    t = str(ftype)
    try:
        if "tuple" in t:
            return tuple(float(v) for v in text.replace(" ", "").split(",") if v)
        if t in ("bool", "<class 'bool'>"):
            low = text.lower()
            if low not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                raise ValueError(text)
            return low in ("1", "true", "yes", "on")
        if t in ("int", "<class 'int'>"):
            return int(text, 0)
        if t in ("float", "<class 'float'>"):
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"bad value for {name}: {text!r}") from None


_FIELDS = {f.name: f for f in fields(SimConfig)}


def resolve_key(key: str) -> str:
    key = key.strip().lower()
    flat = key.replace(".", "_")
    if flat in _FIELDS:
        return flat
    tail = key.rsplit(".", 1)[-1]
    if tail in _FIELDS:
        return tail
    raise ConfigError(f"unknown config key {key!r}")


def apply_overrides(cfg: SimConfig, pairs) -> SimConfig:
    """Apply ``(key, value-text)`` pairs to a copy of ``cfg``."""
    cfg = dataclasses.replace(cfg)
    for key, value in pairs:
        name = resolve_key(key)
        setattr(cfg, name, _convert(value, _FIELDS[name].type, key))
    return cfg


def parse_config_text(text: str, base: SimConfig | None = None) -> SimConfig:
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = line.split("=", 1)
        pairs.append((key, value))
    return apply_overrides(base or SimConfig(), pairs).validate()


def load_config(path) -> SimConfig:
    """Read a config file. ``OSError`` propagates for I/O failures."""
    return parse_config_text(Path(path).read_text())


def format_config(cfg: SimConfig) -> str:
    lines = []
    for f in fields(SimConfig):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ", ".join(repr(x) if not math.isinf(x) else "inf" for x in v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"
