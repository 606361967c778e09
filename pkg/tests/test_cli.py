import dataclasses
import json
import subprocess
import sys

import pytest

from dyadic import cli, verify
from dyadic import diagnostics as diag


def test_help_lists_subcommands(capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(["--help"])
    assert info.value.code == 0
    out = capsys.readouterr().out
    for name in ("run", "sweep", "verify"):
        assert name in out


def test_unknown_tier_is_rejected():
    with pytest.raises(SystemExit) as info:
        cli.main(["verify", "--tier", "medium"])
    assert info.value.code == 2


def test_run_through_main(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"params": {"n_shells": 5}, "t_end": 1.0, "sample_count": 11}))
    assert cli.main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert "wrote" in capsys.readouterr().out
    assert (tmp_path / "o" / "timeseries.csv").exists()


def test_quiet_run_prints_nothing(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"params": {"n_shells": 5}, "t_end": 1.0, "sample_count": 11}))
    assert cli.main(["run", str(cfg), "--out", str(tmp_path / "o"), "--quiet"]) == 0
    assert capsys.readouterr().out == ""


def test_output_dir_from_config(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"params": {"n_shells": 4}, "t_end": 0.5, "sample_count": 3, "output_dir": "here"}))
    assert cli.main(["run", str(cfg), "--quiet"]) == 0
    assert (tmp_path / "here" / "diagnostics.json").exists()


def test_sweep_through_main(tmp_path):
    cfg = tmp_path / "s.json"
    cfg.write_text(json.dumps({"params": {"n_shells": 4}, "t_end": 0.5, "sample_count": 3,
                               "diagnostics": {"enabled": False}, "sweep": {"axes": {"g": [2.0, 2.5]}}}))
    assert cli.main(["sweep", str(cfg), "--out", str(tmp_path / "s"), "--quiet"]) == 0
    assert (tmp_path / "s" / "summary.csv").read_text().count("\n") == 3


def test_module_entry_point_config_error(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"params": {"f0": 0}}))
    proc = subprocess.run([sys.executable, "-m", "dyadic", "run", str(cfg)], capture_output=True, text=True)
    assert proc.returncode == 2
    assert "f0" in proc.stderr


def test_verify_exit_codes(monkeypatch, capsys):
    monkeypatch.setattr(verify, "FAST", (verify.c01_fixed_point, verify.c05_constants))
    assert cli.main(["verify"]) == 0
    out = capsys.readouterr().out
    assert "[PASS] C01" in out and "[PASS] C05" in out


def test_verify_catches_sign_flipped_alpha(monkeypatch, capsys):
    real = diag.constants
    monkeypatch.setattr(diag, "constants", lambda p: dataclasses.replace(real(p), alpha=-real(p).alpha))
    monkeypatch.setattr(verify, "FAST", (verify.c05_constants, verify.c07_lyapunov))
    assert cli.main(["verify", "--tier", "fast"]) == 1
    out = capsys.readouterr().out
    assert "[FAIL] C05" in out and "[FAIL] C07" in out
    assert "2 of 2 criteria failed" in out
