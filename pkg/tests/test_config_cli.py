import math

import numpy as np
import pytest

from nrlink.errors import ConfigError
from nrlink.linksim.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, main
from nrlink.linksim.config import (
    SCENARIOS,
    SimConfig,
    apply_overrides,
    format_config,
    load_config,
    parse_config_text,
    resolve_key,
)
from nrlink.sequences import gold_sequence, pss_sequence, zadoff_chu

CFG_TEXT = """
# small downlink run
scenario = pdsch
num_rb = 4
modulation = 16QAM      # Gray-mapped
dmrs.additional = 0
snr_db = -2, 0, 2
trials = 3
seed = 0x10
ptrs.enabled = yes
"""


def test_scenarios():
    assert set(SCENARIOS) == {"PDSCH", "PUSCH", "CELL_SEARCH", "PRACH"}


def test_parse_config_text():
    cfg = parse_config_text(CFG_TEXT)
    assert cfg.scenario == "PDSCH"
    assert cfg.num_rb == 4 and cfg.modulation == "16QAM"
    assert cfg.dmrs_additional == 0 and cfg.ptrs_enabled is True
    assert cfg.snr_db == (-2.0, 0.0, 2.0)
    assert cfg.seed == 16


def test_format_round_trip():
    cfg = SimConfig(snr_db=(math.inf, 3.5), ptrs_enabled=True)
    assert parse_config_text(format_config(cfg)) == cfg


def test_key_resolution():
    assert resolve_key("dmrs.front") == "dmrs_front"
    assert resolve_key("Channel.SNR_DB") == "snr_db"
    with pytest.raises(ConfigError):
        resolve_key("bogus")


@pytest.mark.parametrize("text", [
    "num_rb = many", "ptrs_enabled = maybe", "nonsense", "unknown = 3",
    "scenario = pdsch\nlayers = 9", "snr_db = a, b",
])
def test_parse_errors(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_overrides_copy():
    base = SimConfig()
    new = apply_overrides(base, [("trials", "7"), ("channel.cfo_hz", "12.5")])
    assert new.trials == 7 and new.cfo_hz == 12.5
    assert base.trials == 100


def test_load_config_io_error(tmp_path):
    with pytest.raises(OSError):
        load_config(tmp_path / "none.cfg")


@pytest.fixture
def cfg_file(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("scenario = PDSCH\nnum_rb = 2\ntrials = 2\nsnr_db = 20\n")
    return p


def test_cli_run_to_stdout(cfg_file, capsys):
    assert main(["run", str(cfg_file)]) == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("scenario,snr_db")
    assert out[1] == "PDSCH,20,2,0,0.000000,0.000"


def test_cli_run_overrides_and_csv(cfg_file, tmp_path, capsys):
    out = tmp_path / "o.csv"
    rc = main(["run", str(cfg_file), "--snr", "inf,30", "--trials", "1", "--workers", "2",
               "--set", "modulation=64QAM", "--out", str(out)])
    assert rc == EXIT_OK
    assert out.read_text().splitlines()[1:] == ["PDSCH,inf,1,0,0.000000,0.000", "PDSCH,30,1,0,0.000000,0.000"]


@pytest.mark.parametrize("argv", [
    ["run", "CFG", "--set", "layers=99"],
    ["run", "CFG", "--set", "novalue"],
    ["run", "CFG", "--trials", "zero"],
    ["run", "CFG", "--set", "scenario=PUSCH", "--set", "transform_precoding=1", "--set", "ptrs_enabled=1"],
    ["frobnicate"],
    ["prach", "--format", "Z9"],
    ["seq", "dump", "--type", "pss", "--nid2", "5"],
    ["ssb", "--pci", "2000", "--out", "x.iq"],
])
def test_cli_config_errors(argv, cfg_file, tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    argv = [str(cfg_file) if a == "CFG" else a for a in argv]
    assert main(argv) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_cli_io_errors(tmp_path, capsys):
    assert main(["run", str(tmp_path / "missing.cfg")]) == EXIT_IO
    assert main(["cellsearch", "--iq", str(tmp_path / "missing.iq")]) == EXIT_IO
    cfg = tmp_path / "c.cfg"
    cfg.write_text("num_rb = 1\ntrials = 1\n")
    assert main(["run", str(cfg), "--out", str(tmp_path / "no" / "o.csv")]) == EXIT_IO


def test_cli_ssb_then_cellsearch(tmp_path, capsys):
    iq = tmp_path / "ssb.iq"
    assert main(["ssb", "--pci", "321", "--out", str(iq), "--delay", "900", "--length", "6000",
                 "--ssb-index", "2", "--payload", "1" * 16 + "0" * 16, "--snr", "10", "--seed", "3"]) == EXIT_OK
    capsys.readouterr()
    assert main(["cellsearch", "--iq", str(iq), "--decode-pbch"]) == EXIT_OK
    line = capsys.readouterr().out.strip()
    assert line.startswith("pci=321 nid1=107 nid2=0 ")
    assert "pbch_crc=ok ssb_index=2" in line
    assert "timing_offset=900" in line


def test_cli_cellsearch_no_cell(tmp_path, capsys):
    iq = tmp_path / "z.iq"
    np.zeros(2 * 5000, dtype="<f4").tofile(iq)
    assert main(["cellsearch", "--iq", str(iq)]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "no cell found"


def test_cli_prach(tmp_path, capsys):
    iq = tmp_path / "p.iq"
    assert main(["prach", "--format", "0", "--preamble", "17", "--delay", "5", "--out", str(iq)]) == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("format=0 L=839")
    assert out[1].startswith("preamble=17 ta=5 ")
    assert main(["prach", "--format", "0", "--iq", str(iq)]) == EXIT_OK
    assert capsys.readouterr().out.splitlines()[1].startswith("preamble=17 ta=5 ")


def test_cli_seq_dump(capsys):
    assert main(["seq", "dump", "--type", "gold", "--c-init", "1234", "--length", "40"]) == EXIT_OK
    out = capsys.readouterr().out.strip()
    assert out == "".join(str(int(b)) for b in gold_sequence(1234, 40))
    assert main(["seq", "dump", "--type", "pss", "--nid2", "1"]) == EXIT_OK
    vals = [int(v) for v in capsys.readouterr().out.split()]
    np.testing.assert_array_equal(vals, pss_sequence(1))
    assert main(["seq", "dump", "--type", "zc", "--root", "25", "--length", "139"]) == EXIT_OK
    rows = capsys.readouterr().out.strip().splitlines()
    z = np.array([complex(*map(float, r.split())) for r in rows])
    np.testing.assert_allclose(z, zadoff_chu(25, 139), atol=1e-11)
    assert main(["seq", "dump", "--type", "lowpapr", "--group", "3", "--length", "24"]) == EXIT_OK
    assert len(capsys.readouterr().out.strip().splitlines()) == 24
