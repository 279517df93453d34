"""Quasi-cyclic LDPC codes on the two NR base graphs.

Base-graph shift tables live in ``nrlink/data/ldpc_bg{1,2}.txt``. Each
non-comment line is ``row col V0 .. V7`` where ``Vi`` is the shift
coefficient for lifting-size set ``i``; the circulant used for lifting
size Z is the identity cyclically shifted right by ``V mod Z``.
"""

from __future__ import annotations

import enum
from functools import lru_cache
from importlib import resources

import numpy as np
import scipy.sparse as sp

from nrlink.errors import DomainError

LIFTING_SETS = {
    0: 2, 1: 3, 2: 5, 3: 7, 4: 9, 5: 11, 6: 13, 7: 15,
}


def _lifting_table() -> dict[int, int]:
    table = {}
    for ils, a in LIFTING_SETS.items():
        z = a
        while z <= 384:
            table[z] = ils
            z *= 2
    return dict(sorted(table.items()))


LIFTING_SIZES = _lifting_table()


class BaseGraphId(enum.Enum):
    BG1 = 1
    BG2 = 2

    @property
    def shape(self) -> tuple[int, int]:
        return (46, 68) if self is BaseGraphId.BG1 else (42, 52)

    @property
    def kb(self) -> int:
        """Systematic base columns."""
        return 22 if self is BaseGraphId.BG1 else 10

    @property
    def max_cb_size(self) -> int:
        return 8448 if self is BaseGraphId.BG1 else 3840


def select_base_graph(size_a: int, code_rate: float) -> BaseGraphId:
    if size_a < 1 or not 0 < code_rate < 1:
        raise DomainError("need size_a >= 1 and 0 < code_rate < 1")
    if size_a <= 292 or (size_a <= 3824 and code_rate <= 0.67) or code_rate <= 0.25:
        return BaseGraphId.BG2
    return BaseGraphId.BG1


@lru_cache(maxsize=None)
def load_base_graph(bg: BaseGraphId) -> np.ndarray:
    """``(entries, 10)`` int array of ``row col V0..V7``."""
    text = resources.files("nrlink").joinpath(f"data/ldpc_bg{bg.value}.txt").read_text()
    rows = [list(map(int, ln.split())) for ln in text.splitlines() if ln and not ln.startswith("#")]
    return np.array(rows, dtype=np.int64)


def min_lifting_size(kb: int, k_prime: int) -> int:
    for z in LIFTING_SIZES:
        if kb * z >= k_prime:
            return z
    raise DomainError(f"no lifting size fits K'={k_prime} with Kb={kb}")


class LdpcCode:
    """Lifted parity-check structure for one (base graph, Z) pair.

    Codeword length before puncturing is ``ncols * Z``; the first ``2 Z``
    systematic bits are never transmitted.
    """

    def __init__(self, bg: BaseGraphId, z: int):
        if z not in LIFTING_SIZES:
            raise DomainError(f"{z} is not a valid lifting size")
        self.bg = bg
        self.z = z
        self.nrows, self.ncols = bg.shape
        self.kb = bg.kb
        self.k = self.kb * z
        self.n = self.ncols * z
        table = load_base_graph(bg)
        self.erow = table[:, 0]
        self.ecol = table[:, 1]
        self.eshift = table[:, 2 + LIFTING_SIZES[z]] % z
        self._build_core()
        self._build_edges()

    def _build_core(self):
        kb, z = self.kb, self.z
        core = (self.erow < 4) & (self.ecol == kb)
        shifts = {}
        for r, s in zip(self.erow[core], self.eshift[core]):
            shifts.setdefault(int(s), []).append(int(r))
        unpaired = [s for s, rows in shifts.items() if len(rows) % 2]
        if len(unpaired) != 1:
            raise DomainError("base graph core is not in double-diagonal form")
        self._p0_shift = unpaired[0]
        self._core_entries = {
            r: [(int(c), int(s)) for c, s in zip(self.ecol[self.erow == r], self.eshift[self.erow == r])]
            for r in range(4)
        }
        # extension rows must end in an identity block on column kb + row
        ext_diag = (self.erow >= 4) & (self.ecol >= kb + 4)
        if not np.all(self.ecol[ext_diag] == kb + self.erow[ext_diag]) or not np.all(self.eshift[ext_diag] == 0):
            raise DomainError("base graph extension is not lower-triangular identity")
        self._ext_mask = (self.erow >= 4) & (self.ecol < kb + 4)

    def _build_edges(self):
        z = self.z
        i = np.arange(z)
        order = np.lexsort((self.ecol, self.erow))
        erow, ecol, esh = self.erow[order], self.ecol[order], self.eshift[order]
        # edges grouped by check node: check r*Z+i gathers every entry of base row r
        chk, var = [], []
        for r in range(self.nrows):
            sel = erow == r
            cols, shs = ecol[sel], esh[sel]
            v = cols[None, :] * z + (i[:, None] + shs[None, :]) % z
            chk.append(np.repeat(r * z + i, len(cols)))
            var.append(v.ravel())
        self.edge_check = np.concatenate(chk)
        self.edge_var = np.concatenate(var)
        counts = np.bincount(self.edge_check, minlength=self.nrows * z)
        self.check_start = np.concatenate([[0], np.cumsum(counts)[:-1]])
        self.check_degree = counts
        e = self.edge_var.size
        self._var_incidence = sp.csr_matrix(
            (np.ones(e), (np.arange(e), self.edge_var)), shape=(e, self.n)
        )

    @property
    def parity_matrix(self) -> sp.csr_matrix:
        e = self.edge_var.size
        return sp.csr_matrix(
            (np.ones(e, dtype=np.uint8), (self.edge_check, self.edge_var)),
            shape=(self.nrows * self.z, self.n),
        )

    def _shifted(self, blocks: np.ndarray, col: int, shift: int) -> np.ndarray:
        return np.roll(blocks[:, col], -shift, axis=-1)

    def encode(self, info: np.ndarray) -> np.ndarray:
        """Encode ``(..., K)`` info bits into ``(..., ncols*Z)`` codewords."""
        info = np.asarray(info, dtype=np.uint8)
        if info.shape[-1] != self.k:
            raise DomainError(f"expected {self.k} info bits, got {info.shape[-1]}")
        lead = info.shape[:-1]
        s = info.reshape(-1, self.kb, self.z)
        batch = s.shape[0]
        kb, z = self.kb, self.z
        cw = np.zeros((batch, self.ncols, z), dtype=np.uint8)
        cw[:, :kb] = s
        lam = np.zeros((4, batch, z), dtype=np.uint8)
        for r in range(4):
            for c, sh in self._core_entries[r]:
                if c < kb:
                    lam[r] ^= self._shifted(cw, c, sh)
        total = lam[0] ^ lam[1] ^ lam[2] ^ lam[3]
        cw[:, kb] = np.roll(total, self._p0_shift, axis=-1)
        known = {kb}
        pending = [0, 1, 2, 3]
        while pending:
            for r in list(pending):
                unknown = [c for c, _ in self._core_entries[r] if c >= kb and c not in known]
                if len(unknown) > 1:
                    continue
                pending.remove(r)
                if not unknown:
                    continue
                acc = lam[r].copy()
                for c, sh in self._core_entries[r]:
                    if c >= kb and c in known:
                        acc ^= self._shifted(cw, c, sh)
                sh_u = dict(self._core_entries[r])[unknown[0]]
                cw[:, unknown[0]] = np.roll(acc, sh_u, axis=-1)
                known.add(unknown[0])
        rows = self.erow[self._ext_mask]
        cols = self.ecol[self._ext_mask]
        shs = self.eshift[self._ext_mask]
        for r, c, sh in zip(rows, cols, shs):
            cw[:, kb + r] ^= self._shifted(cw, c, sh)
        return cw.reshape(*lead, self.n)

    def syndrome(self, codeword: np.ndarray) -> np.ndarray:
        cw = np.asarray(codeword, dtype=np.uint8)
        lead = cw.shape[:-1]
        cw = cw.reshape(-1, self.n)
        syn = np.add.reduceat(cw[:, self.edge_var].astype(np.int32), self.check_start, axis=1) & 1
        return syn.reshape(*lead, -1).astype(np.uint8)

    def decode(self, llr: np.ndarray, max_iters: int = 25, norm: float = 0.75):
        """Normalized min-sum decoding (flooding schedule).

        ``llr`` has shape ``(..., ncols*Z)`` with positive values favoring 0.
        Returns ``(bits, converged)``: hard decisions on all codeword bits and
        a per-word flag that is set once every check is satisfied and no
        posterior is exactly zero.
        """
        llr = np.asarray(llr, dtype=float)
        lead = llr.shape[:-1]
        ch = llr.reshape(-1, self.n)
        batch = ch.shape[0]
        ev, starts = self.edge_var, self.check_start
        seg = self.edge_check
        c2v = np.zeros((batch, ev.size))
        post = ch.copy()
        bits = np.zeros((batch, self.n), dtype=np.uint8)
        done = np.zeros(batch, dtype=bool)
        active = np.arange(batch)
        for _ in range(max_iters):
            v2c = post[active][:, ev] - c2v[active]
            mag = np.abs(v2c)
            neg = v2c < 0
            min1 = np.minimum.reduceat(mag, starts, axis=1)
            is_min = mag == min1[:, seg]
            nmin = np.add.reduceat(is_min, starts, axis=1)
            mag2 = np.where(is_min, np.inf, mag)
            min2 = np.minimum.reduceat(mag2, starts, axis=1)
            min2 = np.where(nmin >= 2, min1, min2)
            parity = np.add.reduceat(neg, starts, axis=1) & 1
            sign = 1.0 - 2.0 * (parity[:, seg] ^ neg)
            out = norm * sign * np.where(is_min, min2[:, seg], min1[:, seg])
            out[~np.isfinite(out)] = 0.0
            c2v[active] = out
            post[active] = ch[active] + (self._var_incidence.T @ out.T).T
            hard = (post[active] < 0).astype(np.uint8)
            syn = np.add.reduceat(hard[:, ev].astype(np.int32), starts, axis=1) & 1
            ok = ~syn.any(axis=1) & np.all(post[active] != 0, axis=1)
            bits[active] = hard
            done[active[ok]] = True
            active = active[~ok]
            if active.size == 0:
                break
        return bits.reshape(*lead, self.n), done.reshape(lead)


@lru_cache(maxsize=64)
def ldpc_code(bg: BaseGraphId, z: int) -> LdpcCode:
    return LdpcCode(bg, z)


def ldpc_encode(cb_bits: np.ndarray, bg: BaseGraphId, z: int) -> np.ndarray:
    """Encode a filler-padded code block of ``Kb_max * Z`` bits.

    Returns the transmitted codeword: the full lifted codeword with the
    first ``2 Z`` systematic bits removed.
    """
    code = ldpc_code(bg, z)
    cw = code.encode(cb_bits)
    return cw[..., 2 * z:]
