"""CSV result files and raw IQ captures with a text sidecar."""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from nrlink.errors import IoError
from nrlink.linksim.harness import SimResult

CSV_HEADER = ("scenario", "snr_db", "trials", "errors", "rate", "elapsed_s")


def format_csv(results) -> str:
    if isinstance(results, SimResult):
        results = [results]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for res in results:
        for p in res.points:
            w.writerow([res.scenario, f"{p.snr_db:g}", p.trials, p.errors, f"{p.rate:.6f}", f"{p.elapsed_s:.3f}"])
    return buf.getvalue()


def write_csv(results, path) -> None:
    path = Path(path)
    try:
        path.write_text(format_csv(results))
    except OSError as e:
        raise IoError(f"cannot write CSV {path}: {e.strerror or e}") from e


def meta_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta")


def write_iq(path, samples, sample_rate_hz: float, scs_khz: float) -> None:
    """Interleaved little-endian float32 I/Q plus ``<path>.meta``."""
    path = Path(path)
    x = np.asarray(samples, dtype=np.complex64).ravel()
    inter = np.empty(2 * x.size, dtype="<f4")
    inter[0::2] = x.real
    inter[1::2] = x.imag
    try:
        path.write_bytes(inter.tobytes())
        meta_path(path).write_text(f"sample_rate_hz = {sample_rate_hz!r}\nscs_khz = {scs_khz!r}\n")
    except OSError as e:
        raise IoError(f"cannot write IQ file {path}: {e.strerror or e}") from e


def read_iq(path) -> tuple[np.ndarray, dict]:
    """Samples as complex64 and the sidecar fields (empty if absent)."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise IoError(f"cannot read IQ file {path}: {e.strerror or e}") from e
    if len(raw) % 8:
        raise IoError(f"IQ file {path} is not a whole number of float32 I/Q pairs")
    f = np.frombuffer(raw, dtype="<f4")
    x = (f[0::2] + 1j * f[1::2]).astype(np.complex64)
    meta = {}
    mp = meta_path(path)
    if mp.exists():
        try:
            for line in mp.read_text().splitlines():
                if "=" in line:
                    k, v = line.split("=", 1)
                    meta[k.strip()] = float(v)
        except (OSError, ValueError) as e:
            raise IoError(f"bad sidecar {mp}: {e}") from e
    return x, meta
