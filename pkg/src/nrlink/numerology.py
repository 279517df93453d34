"""NR timing/frequency structure and the resource-grid container.

Covers numerologies, frequency ranges, slot formats, bandwidth parts,
allocations (slots and mini-slots), reserved resource patterns, and the
per-port resource grid with occupancy tracking.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from nrlink.errors import CollisionError, DomainError

SUBCARRIERS_PER_RB = 12
SYMBOLS_PER_SLOT = 14
SUBFRAMES_PER_FRAME = 10
SUBFRAME_MS = 1.0
MAX_ACTIVE_SUBCARRIERS = 3300
MAX_BWPS_PER_DIRECTION = 4

# LTE normal CP, the base value NR scales by 2^-mu
BASE_CP_US = 4.7


@dataclass(frozen=True)
class Numerology:
    mu: int
    scs_khz: int
    slots_per_subframe: int
    symbols_per_slot: int
    cp_us: float

    @property
    def scs_hz(self) -> float:
        return self.scs_khz * 1e3

    @property
    def symbols_per_subframe(self) -> int:
        return self.slots_per_subframe * self.symbols_per_slot

    def cp_samples(self, fft_size: int, symbol_in_subframe: int) -> int:
        """Cyclic-prefix length in samples at sample rate ``fft_size * scs``.

        The first symbol of each half-subframe carries a longer CP so that a
        subframe holds exactly 15 * 2^mu * fft_size samples.
        """
        if fft_size % 128:
            raise DomainError(f"fft_size {fft_size} must be a multiple of 128")
        ncp = 144 * fft_size // 2048
        if symbol_in_subframe % (7 * 2**self.mu) == 0:
            ncp += 16 * fft_size * 2**self.mu // 2048
        return ncp

    def slot_cp_samples(self, fft_size: int, slot_in_subframe: int = 0) -> list[int]:
        first = (slot_in_subframe % self.slots_per_subframe) * SYMBOLS_PER_SLOT
        return [self.cp_samples(fft_size, first + l) for l in range(SYMBOLS_PER_SLOT)]

    def samples_per_subframe(self, fft_size: int) -> int:
        return sum(
            fft_size + self.cp_samples(fft_size, l)
            for l in range(self.symbols_per_subframe)
        )

    def sample_rate_hz(self, fft_size: int) -> float:
        return fft_size * self.scs_hz


def numerology_params(mu: int) -> Numerology:
    if not isinstance(mu, (int, np.integer)) or not 0 <= mu <= 4:
        raise DomainError(f"numerology mu must be an integer in 0..4, got {mu!r}")
    mu = int(mu)
    return Numerology(
        mu=mu,
        scs_khz=15 * 2**mu,
        slots_per_subframe=2**mu,
        symbols_per_slot=SYMBOLS_PER_SLOT,
        cp_us=BASE_CP_US / 2**mu,
    )


def numerology_for_scs(scs_khz: float) -> Numerology:
    for mu in range(5):
        if 15 * 2**mu == scs_khz:
            return numerology_params(mu)
    raise DomainError(f"no numerology with subcarrier spacing {scs_khz} kHz")


@dataclass(frozen=True)
class FrequencyRange:
    id: str
    low_mhz: float
    high_mhz: float
    max_carrier_bw_mhz: float


FR1 = FrequencyRange("FR1", 450.0, 6000.0, 100.0)
FR2 = FrequencyRange("FR2", 24250.0, 52600.0, 400.0)


def validate_carrier(num_rb: int, numerology: Numerology, fr: FrequencyRange | None = None) -> list[str]:
    """Return the list of carrier-limit violations (empty when the carrier is legal)."""
    if num_rb <= 0:
        raise DomainError("num_rb must be positive")
    violations = []
    nsc = SUBCARRIERS_PER_RB * num_rb
    if nsc > MAX_ACTIVE_SUBCARRIERS:
        violations.append(
            f"{nsc} active subcarriers exceeds the {MAX_ACTIVE_SUBCARRIERS} limit"
        )
    if fr is not None:
        bw_mhz = nsc * numerology.scs_khz / 1e3
        if bw_mhz > fr.max_carrier_bw_mhz + 1e-9:
            violations.append(
                f"occupied bandwidth {bw_mhz:g} MHz exceeds {fr.id} cap of "
                f"{fr.max_carrier_bw_mhz:g} MHz"
            )
    return violations


class Direction(enum.Enum):
    DL = "DL"
    UL = "UL"
    FLEXIBLE = "FLEXIBLE"


@dataclass(frozen=True)
class SlotFormat:
    directions: tuple[Direction, ...] = (Direction.FLEXIBLE,) * SYMBOLS_PER_SLOT

    def __post_init__(self):
        if len(self.directions) != SYMBOLS_PER_SLOT:
            raise DomainError(
                f"slot format needs {SYMBOLS_PER_SLOT} entries, got {len(self.directions)}"
            )

    @classmethod
    def from_string(cls, pattern: str) -> SlotFormat:
        """Parse a compact pattern such as ``"DDDDDDDDDDFFUU"``."""
        lut = {"D": Direction.DL, "U": Direction.UL, "F": Direction.FLEXIBLE}
        try:
            return cls(tuple(lut[c] for c in pattern.upper()))
        except KeyError as exc:
            raise DomainError(f"bad slot format character {exc}") from None


def classify_symbol(slot_format: SlotFormat | None, symbol_idx: int, direction: Direction) -> bool:
    """Whether a transmission in ``direction`` may use symbol ``symbol_idx``."""
    if not 0 <= symbol_idx < SYMBOLS_PER_SLOT:
        raise DomainError(f"symbol index {symbol_idx} out of range")
    if direction not in (Direction.DL, Direction.UL):
        raise DomainError("direction must be DL or UL")
    if slot_format is None:
        return True
    entry = slot_format.directions[symbol_idx]
    return entry is Direction.FLEXIBLE or entry is direction


@dataclass(frozen=True)
class BandwidthPart:
    id: int
    start_rb: int
    num_rb: int
    numerology: Numerology
    direction: Direction

    def __post_init__(self):
        if not 0 <= self.id < MAX_BWPS_PER_DIRECTION:
            raise DomainError(f"bandwidth part id {self.id} out of range 0..3")
        if self.num_rb <= 0 or self.start_rb < 0:
            raise DomainError("bandwidth part needs start_rb >= 0 and num_rb > 0")
        if self.direction not in (Direction.DL, Direction.UL):
            raise DomainError("bandwidth part direction must be DL or UL")


@dataclass
class Carrier:
    """Single carrier owning its bandwidth parts; one active BWP per direction."""

    num_rb: int
    numerology: Numerology
    bwps: dict[tuple[Direction, int], BandwidthPart] = field(default_factory=dict)
    active: dict[Direction, int] = field(default_factory=dict)

    def configure(self, bwp: BandwidthPart) -> None:
        if bwp.start_rb + bwp.num_rb > self.num_rb:
            raise DomainError(
                f"bandwidth part {bwp.id} spans RBs beyond the carrier ({self.num_rb} RBs)"
            )
        existing = [k for k in self.bwps if k[0] is bwp.direction]
        if (bwp.direction, bwp.id) not in self.bwps and len(existing) >= MAX_BWPS_PER_DIRECTION:
            raise DomainError(f"at most {MAX_BWPS_PER_DIRECTION} bandwidth parts per direction")
        self.bwps[(bwp.direction, bwp.id)] = bwp

    def activate(self, direction: Direction, bwp_id: int) -> None:
        if (direction, bwp_id) not in self.bwps:
            raise DomainError(f"bandwidth part {bwp_id} not configured for {direction.value}")
        # replaces any previously active part for this direction
        self.active[direction] = bwp_id

    def active_bwp(self, direction: Direction) -> BandwidthPart | None:
        bwp_id = self.active.get(direction)
        return None if bwp_id is None else self.bwps[(direction, bwp_id)]


@dataclass(frozen=True)
class Allocation:
    """Time/frequency allocation inside one slot.

    A mini-slot is just an allocation with an arbitrary start symbol and
    a short length.
    """

    start_rb: int
    num_rb: int
    start_symbol: int = 0
    num_symbols: int = SYMBOLS_PER_SLOT

    def __post_init__(self):
        if self.num_rb <= 0 or self.start_rb < 0:
            raise DomainError("allocation needs start_rb >= 0 and num_rb > 0")
        if self.num_symbols <= 0 or self.start_symbol < 0:
            raise DomainError("allocation needs start_symbol >= 0 and num_symbols > 0")
        if self.start_symbol + self.num_symbols > SYMBOLS_PER_SLOT:
            raise DomainError("allocation extends beyond the slot")

    @property
    def symbols(self) -> range:
        return range(self.start_symbol, self.start_symbol + self.num_symbols)

    @property
    def subcarriers(self) -> range:
        k0 = self.start_rb * SUBCARRIERS_PER_RB
        return range(k0, k0 + self.num_rb * SUBCARRIERS_PER_RB)

    def re_set(self) -> set[tuple[int, int]]:
        return {(k, l) for l in self.symbols for k in self.subcarriers}


class Granularity(enum.Enum):
    RB_SYMBOL = "RB_SYMBOL"
    RE = "RE"


@dataclass(frozen=True)
class ReservedPattern:
    granularity: Granularity = Granularity.RE
    rb_symbol_mask: frozenset = frozenset()
    re_mask: frozenset = frozenset()

    def covered_res(self) -> set[tuple[int, int]]:
        out = set(self.re_mask)
        for rb, l in self.rb_symbol_mask:
            k0 = rb * SUBCARRIERS_PER_RB
            out.update((k0 + i, l) for i in range(SUBCARRIERS_PER_RB))
        return out

    def check_within(self, num_subcarriers: int, num_symbols: int) -> None:
        for k, l in self.covered_res():
            if not (0 <= k < num_subcarriers and 0 <= l < num_symbols):
                raise DomainError(f"reserved RE {(k, l)} lies outside the grid")

    def mask(self, num_subcarriers: int, num_symbols: int) -> np.ndarray:
        m = np.zeros((num_subcarriers, num_symbols), dtype=bool)
        for k, l in self.covered_res():
            if 0 <= k < num_subcarriers and 0 <= l < num_symbols:
                m[k, l] = True
        return m


def apply_reserved(alloc, pattern: ReservedPattern) -> set[tuple[int, int]]:
    """Remove every RE covered by ``pattern`` from the RE set ``alloc``."""
    if isinstance(alloc, Allocation):
        alloc = alloc.re_set()
    return set(alloc) - pattern.covered_res()


class ResourceGrid:
    """Complex values per (port, subcarrier, symbol) plus an RE occupancy map.

    Occupancy is tracked per (subcarrier, symbol) across ports: the same
    channel may use an RE on several ports (layers, CDM ports), but two
    different channels may not share an RE.
    """

    def __init__(self, num_ports: int, num_rb: int, num_symbols: int = SYMBOLS_PER_SLOT):
        nsc = SUBCARRIERS_PER_RB * num_rb
        if num_ports < 1 or num_rb < 1 or num_symbols < 1:
            raise DomainError("grid dimensions must be positive")
        if nsc > MAX_ACTIVE_SUBCARRIERS:
            raise DomainError(f"{nsc} subcarriers exceeds {MAX_ACTIVE_SUBCARRIERS}")
        self.num_ports = num_ports
        self.num_rb = num_rb
        self.num_subcarriers = nsc
        self.num_symbols = num_symbols
        self.values = np.zeros((num_ports, nsc, num_symbols), dtype=complex)
        self._occ = np.full((nsc, num_symbols), -1, dtype=np.int32)
        self._tags: list[str] = []
        self.frozen = False

    def _tag_id(self, tag: str) -> int:
        try:
            return self._tags.index(tag)
        except ValueError:
            self._tags.append(tag)
            return len(self._tags) - 1

    def map_array(self, port: int, ks, ls, values, tag: str) -> None:
        """Vectorized write of ``values`` at (ks[i], ls[i]) on ``port``."""
        if self.frozen:
            raise DomainError("grid is frozen")
        ks = np.asarray(ks, dtype=int).ravel()
        ls = np.asarray(ls, dtype=int).ravel()
        values = np.broadcast_to(np.asarray(values, dtype=complex).ravel(), ks.shape)
        if not 0 <= port < self.num_ports:
            raise DomainError(f"port {port} out of range")
        if ks.size == 0:
            return
        if ks.min() < 0 or ks.max() >= self.num_subcarriers or ls.min() < 0 or ls.max() >= self.num_symbols:
            raise DomainError("RE coordinate outside the grid")
        tid = self._tag_id(tag)
        occ = self._occ[ks, ls]
        clash = (occ >= 0) & (occ != tid)
        if clash.any():
            i = int(np.argmax(clash))
            raise CollisionError((int(ks[i]), int(ls[i])), self._tags[occ[i]], tag)
        self.values[port, ks, ls] = values
        self._occ[ks, ls] = tid

    def map_res(self, port: int, res, channel_tag: str) -> ResourceGrid:
        """Write a list of (subcarrier, symbol, value) triples."""
        res = list(res)
        if not res:
            return self
        ks, ls, vals = zip(*res)
        self.map_array(port, ks, ls, vals, channel_tag)
        return self

    def extract(self, port: int, ks, ls) -> np.ndarray:
        return self.values[port, np.asarray(ks, dtype=int), np.asarray(ls, dtype=int)]

    def tag_at(self, k: int, l: int) -> str | None:
        tid = self._occ[k, l]
        return None if tid < 0 else self._tags[tid]

    def occupancy_mask(self, tag: str | None = None) -> np.ndarray:
        if tag is None:
            return self._occ >= 0
        if tag not in self._tags:
            return np.zeros_like(self._occ, dtype=bool)
        return self._occ == self._tags.index(tag)

    @property
    def occupancy_count(self) -> int:
        return int((self._occ >= 0).sum())

    def freeze(self) -> ResourceGrid:
        self.frozen = True
        self.values.setflags(write=False)
        return self
