import os
import subprocess
import sys

import pytest

from splitkit import cli, harness


def test_kernels_F(capsys):
    assert cli.main(["kernels", "--family", "F"]) == 0
    out = capsys.readouterr().out
    assert "optimal tau = 0.2113248654051871" in out
    assert "0.21132486540518713" in out


def test_kernels_D_with_tau(capsys):
    assert cli.main(["kernels", "--family", "D", "--tau", "0.5"]) == 0
    out = capsys.readouterr().out
    assert "0.08333333333333" in out and "optimal" not in out


def test_kernels_bad_tau(capsys):
    assert cli.main(["kernels", "--family", "F", "--tau", "0.9"]) == 2


def test_study_config_errors(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("problem = matrix\nwhatever = 3\n")
    assert cli.main(["study", "--config", str(cfg)]) == 2
    assert cli.main(["study", "--problem", "matrix", "--h", "0.3"]) == 2
    with pytest.raises(SystemExit) as info:
        cli.main(["study", "--problem", "heat"])
    assert info.value.code == 2


def test_study_io_error(tmp_path, capsys):
    blocker = tmp_path / "f"
    blocker.write_text("")
    rc = cli.main(["study", "--problem", "matrix", "--tau", "0.5", "--h", "0.5", "--t-end", "0.5", "--dim", "4",
                   "--repeats", "1", "--out", str(blocker / "x")])
    assert rc == 4
    assert str(blocker / "x") in capsys.readouterr().err


def test_study_cell_failure_exit(tmp_path, monkeypatch, capsys):
    monkeypatch.setattr(harness, "_run_cell", lambda *a: (_ for _ in ()).throw(RuntimeError("bad cell")))
    rc = cli.main(["study", "--problem", "matrix", "--tau", "0.5", "--h", "0.5", "--t-end", "0.5", "--dim", "4",
                   "--out", str(tmp_path)])
    assert rc == 3
    assert "bad cell" in capsys.readouterr().err
    assert os.path.exists(tmp_path / "matrix_F.csv")


def test_study_success(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("problem = matrix\nfamily = D\ntau = 0.5\nh = 1/4\nh = 1/8\nh = 1/16\nt-end = 1/2\nrepeats = 1\nemit = csv\n")
    assert cli.main(["study", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    out = capsys.readouterr().out
    assert "order=" in out and os.path.exists(tmp_path / "o" / "matrix_D.csv")
    assert not os.path.exists(tmp_path / "o" / "matrix_D.svg")


def test_verify_subprocess():
    proc = subprocess.run([sys.executable, "-m", "splitkit.cli", "verify"], capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0, proc.stdout + proc.stderr
    lines = proc.stdout.strip().splitlines()
    assert len(lines) >= 5 and all(l.startswith("PASS") for l in lines)
