import numpy as np
import pytest

from vsdp.ber import read_csv
from vsdp.cli import main
from vsdp.uwb import BlockConfig, sample_channel, simulate_block
from vsdp.volterra import save_system

CFG = """presets = CM1
ebn0_db = 12, 20
trials = 6
nb = 4
guard_ns = 100
gap_rel = 1e-2
"""


def test_sweep_writes_csv_and_plot(tmp_path, capsys):
    cfg = tmp_path / "s.cfg"
    cfg.write_text(CFG)
    out = tmp_path / "out" / "r.csv"
    rc = main(["sweep", str(cfg), "--out-csv", str(out), "--out-plot", str(tmp_path / "r.svg"), "--seed", "3"])
    assert rc == 0
    recs = read_csv(out)
    assert len(recs) == 4 and all(r.seed == 3 and r.bits == 24 for r in recs)
    assert (tmp_path / "r.svg").read_text().startswith("<?xml")
    assert "CM1 20 dB sdp" in capsys.readouterr().err


def test_sweep_trials_override_and_quiet(tmp_path, capsys):
    cfg = tmp_path / "s.cfg"
    cfg.write_text(CFG + f"out_csv = {tmp_path / 'c.csv'}\n")
    assert main(["sweep", str(cfg), "--trials", "2", "-q", "--threads", "1"]) == 0
    assert all(r.bits == 8 for r in read_csv(tmp_path / "c.csv"))
    assert capsys.readouterr().err == ""


def test_sweep_errors(tmp_path, capsys):
    assert main(["sweep", str(tmp_path / "missing.cfg"), "--out-csv", "x.csv"]) == 1
    cfg = tmp_path / "s.cfg"
    cfg.write_text(CFG)
    assert main(["sweep", str(cfg)]) == 1  # no output path anywhere
    cfg.write_text("nonsense = 1\n")
    assert main(["sweep", str(cfg), "--out-csv", str(tmp_path / "x.csv")]) == 1
    assert "unknown key" in capsys.readouterr().err


def test_demod_prints_both_detectors(tmp_path, capsys):
    cfg = BlockConfig(nb=5)
    d = np.array([1, -1, -1, 1, 1])
    blk = simulate_block(cfg, sample_channel("CM1", np.random.default_rng(4)), d)
    path = tmp_path / "sys.txt"
    save_system(blk.system(cfg), path)
    assert main(["demod", str(path), "--ml"]) == 0
    out = capsys.readouterr().out
    assert "sdp   d_hat = +1 -1 -1 +1 +1" in out
    assert "ml    d_hat = +1 -1 -1 +1 +1" in out
    assert "agree = True" in out


def test_demod_bad_file(tmp_path):
    p = tmp_path / "junk.txt"
    p.write_text("not a system\n")
    assert main(["demod", str(p)]) == 1


def test_selftest_passes(capsys):
    assert main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 6 and "FAIL" not in out


def test_usage_errors_exit_2():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["sweep", "a.cfg", "--threads", "two"])
    assert exc.value.code == 2
