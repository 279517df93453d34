"""Command-line entry point ``linksim``.

Exit codes: 0 success, 2 configuration error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from nrlink.errors import ConfigError, DomainError, IoError

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _run(args) -> int:
    from nrlink.linksim.config import SimConfig, apply_overrides, load_config
    from nrlink.linksim.harness import run_scenario
    from nrlink.linksim.io import format_csv, write_csv

    try:
        cfg = load_config(args.config)
    except OSError as e:
        raise IoError(f"cannot read config {args.config}: {e.strerror or e}") from e
    pairs = [kv.split("=", 1) for kv in args.set]
    if any(len(p) != 2 for p in pairs):
        raise ConfigError("--set expects key=value")
    for flag, key in (("snr", "snr_db"), ("trials", "trials"), ("workers", "workers"), ("seed", "seed")):
        v = getattr(args, flag)
        if v is not None:
            pairs.append((key, v))
    if args.timing:
        pairs.append(("record_timing", "true"))
    cfg = apply_overrides(cfg, pairs).validate()
    result = run_scenario(cfg)
    if args.out:
        write_csv(result, args.out)
    else:
        sys.stdout.write(format_csv(result))
    return EXIT_OK


def _cellsearch(args) -> int:
    from nrlink.access.cellsearch import CellSearchConfig, cell_search
    from nrlink.linksim.io import read_iq

    x, meta = read_iq(args.iq)
    scs = args.scs if args.scs is not None else int(meta.get("scs_khz", 15))
    fft = args.fft or int(round(meta.get("sample_rate_hz", 512 * scs * 1e3) / (scs * 1e3)))
    try:
        cfg = CellSearchConfig(fft_size=fft, decode_pbch=args.decode_pbch)
    except DomainError as e:
        raise ConfigError(str(e)) from None
    res = cell_search(x, scs, cfg)
    if res is None:
        print("no cell found")
        return EXIT_OK
    line = (f"pci={res.pci.pci} nid1={res.pci.nid1} nid2={res.pci.nid2} "
            f"timing_offset={res.timing_offset_samples} cfo_hz={res.cfo_hz:.1f} metric={res.metric:.4f}")
    if res.pbch_ok is not None:
        line += f" pbch_crc={'ok' if res.pbch_ok else 'fail'} ssb_index={res.ssb_index}"
    print(line)
    return EXIT_OK


def _prach(args) -> int:
    from nrlink.access.prach import ZoneConfig, detect_prach, generate_prach, prach_format, preamble_shift
    from nrlink.linksim.channel import ChannelConfig, channel_apply
    from nrlink.linksim.io import read_iq, write_iq

    try:
        fmt = prach_format(args.format, args.scs, args.fft)
        zone = ZoneConfig(args.ncs) if args.threshold is None else ZoneConfig(args.ncs, args.threshold)
        if args.iq:
            x, _ = read_iq(args.iq)
        else:
            x = generate_prach(fmt, args.root, preamble_shift(args.preamble, fmt, zone))
            x = channel_apply(x, ChannelConfig(args.snr, delay_samples=args.delay, seed=args.seed,
                                               tail_samples=args.delay + 1))
            if args.out:
                write_iq(args.out, x, fmt.sample_rate_hz, fmt.scs_khz)
        dets = detect_prach(x, fmt, args.root, zone)
    except DomainError as e:
        raise ConfigError(str(e)) from None
    print(f"format={fmt.format_id} L={fmt.seq_len} scs_khz={fmt.scs_khz:g} cp={fmt.cp_samples} "
          f"fft={fmt.fft_size} detections={len(dets)}")
    for d in dets:
        print(f"preamble={d.preamble_index} ta={d.timing_advance_samples} metric={d.metric:.2f}")
    return EXIT_OK


def _ssb(args) -> int:
    from nrlink.access.cellsearch import DEFAULT_FFT, ssb_capture
    from nrlink.linksim.channel import ChannelConfig, channel_apply
    from nrlink.linksim.io import write_iq

    try:
        payload = None
        if args.payload:
            payload = np.array([int(c) for c in args.payload], dtype=np.uint8)
        x = ssb_capture(args.pci, args.delay, args.length, args.scs, DEFAULT_FFT, args.ssb_index, payload)
    except (DomainError, ValueError) as e:
        raise ConfigError(str(e)) from None
    rate = DEFAULT_FFT * args.scs * 1e3
    nz = np.abs(x) > 0
    x = channel_apply(x, ChannelConfig(args.snr, args.cfo, sample_rate_hz=rate, seed=args.seed,
                                       signal_power=float(np.mean(np.abs(x[nz]) ** 2))))
    write_iq(args.out, x, rate, args.scs)
    print(f"wrote {x.size} samples to {args.out}")
    return EXIT_OK


def _seq_dump(args) -> int:
    from nrlink import sequences as s

    try:
        if args.type == "gold":
            vals = s.gold_sequence(args.c_init, args.length)
        elif args.type == "pss":
            vals = s.pss_sequence(args.nid2)
        elif args.type == "sss":
            vals = s.sss_sequence(s.CellId(args.pci))
        elif args.type == "zc":
            vals = s.zadoff_chu(args.root, args.length, args.shift)
        else:
            vals = s.low_papr_sequence(args.group, args.length)
    except DomainError as e:
        raise ConfigError(str(e)) from None
    vals = np.asarray(vals)
    if np.iscomplexobj(vals):
        for v in vals:
            print(f"{v.real:.12g} {v.imag:.12g}")
    else:
        print("".join(str(int(v)) for v in vals) if args.type == "gold" else "\n".join(f"{int(v)}" for v in vals))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="linksim", description="5G NR physical-layer link-level simulator")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run a Monte-Carlo scenario from a config file")
    r.add_argument("config")
    r.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    r.add_argument("--snr", help="comma-separated SNR list in dB")
    r.add_argument("--trials")
    r.add_argument("--workers")
    r.add_argument("--seed")
    r.add_argument("--out", help="CSV output path (default: stdout)")
    r.add_argument("--timing", action="store_true", help="record wall-clock time in elapsed_s")
    r.set_defaults(func=_run)

    c = sub.add_parser("cellsearch", help="find PCI, timing and CFO in an IQ capture")
    c.add_argument("--iq", required=True)
    c.add_argument("--scs", type=int, default=None, help="subcarrier spacing in kHz")
    c.add_argument("--fft", type=int, default=None)
    c.add_argument("--decode-pbch", action="store_true")
    c.set_defaults(func=_cellsearch)

    q = sub.add_parser("prach", help="generate and/or detect PRACH preambles")
    q.add_argument("--format", required=True)
    q.add_argument("--root", type=int, default=25)
    q.add_argument("--ncs", type=int, default=13)
    q.add_argument("--scs", type=float, default=None)
    q.add_argument("--fft", type=int, default=None)
    q.add_argument("--threshold", type=float, default=None)
    q.add_argument("--iq", help="detect in this capture instead of generating one")
    q.add_argument("--preamble", type=int, default=0)
    q.add_argument("--delay", type=int, default=0)
    q.add_argument("--snr", type=float, default=float("inf"))
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", help="write the generated capture as IQ")
    q.set_defaults(func=_prach)

    g = sub.add_parser("ssb", help="write an IQ capture holding one SS/PBCH block")
    g.add_argument("--pci", type=int, required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--scs", type=int, default=15)
    g.add_argument("--delay", type=int, default=0)
    g.add_argument("--length", type=int, default=None)
    g.add_argument("--ssb-index", type=int, default=0)
    g.add_argument("--payload", default=None, help="PBCH payload as a 0/1 string")
    g.add_argument("--snr", type=float, default=float("inf"))
    g.add_argument("--cfo", type=float, default=0.0)
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=_ssb)

    s = sub.add_parser("seq", help="sequence utilities")
    ssub = s.add_subparsers(dest="seq_command", required=True, parser_class=_Parser)
    d = ssub.add_parser("dump", help="print a sequence")
    d.add_argument("--type", choices=("gold", "pss", "sss", "zc", "lowpapr"), required=True)
    d.add_argument("--c-init", type=int, default=0)
    d.add_argument("--length", type=int, default=127)
    d.add_argument("--nid2", type=int, default=0)
    d.add_argument("--pci", type=int, default=0)
    d.add_argument("--root", type=int, default=25)
    d.add_argument("--shift", type=int, default=0)
    d.add_argument("--group", type=int, default=0)
    d.set_defaults(func=_seq_dump)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (IoError, OSError) as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
