import json
import os
import subprocess
import sys

import pytest

from twinboot.cli import main


def err_line(capsys):
    lines = capsys.readouterr().err.strip().splitlines()
    return json.loads(lines[-1])


def test_run_sweep_report(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["run", "--preset", "figure1", "--seed", "3", "--out", str(out)]) == 0
    assert (out / "seed-0003" / "history.csv").exists()
    assert (out / "config.yaml").exists()
    sw = tmp_path / "sweep"
    assert main(["sweep", "--preset", "figure3", "--axis", "M", "--values", "25,50",
                 "--seeds", "1..2", "--out", str(sw), "--set", "train.epochs=3"]) == 0
    assert (sw / "sweep.csv").exists()
    assert main(["report", "--in", str(sw)]) == 0
    assert "final_sigma" in capsys.readouterr().out


@pytest.mark.parametrize("argv, kind, code", [
    (["run", "--preset", "nope"], "invalid_argument", 2),
    (["run", "--preset", "figure1", "--set", "bad.key=1"], "invalid_argument", 2),
    (["sweep", "--preset", "figure3", "--axis", "zzz", "--values", "1"], "invalid_argument", 2),
    (["report", "--in", "/nonexistent/dir"], "io_error", 3),
    ([], "invalid_argument", 2),
])
def test_failures_print_machine_readable_line(argv, kind, code, capsys, tmp_path):
    assert main(argv) == code
    e = err_line(capsys)
    assert e["error"] == kind and e["message"]


def test_console_script_exit_codes(tmp_path):
    ok = subprocess.run([sys.executable, "-m", "twinboot.cli", "run", "--preset", "figure1",
                         "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert ok.returncode == 0, ok.stderr
    bad = subprocess.run([sys.executable, "-m", "twinboot.cli", "run", "--preset", "figure1",
                          "--out", str(tmp_path / "o"), "--seeds", "5..1"],
                         capture_output=True, text=True)
    assert bad.returncode == 2
    assert json.loads(bad.stderr.strip())["error"] == "invalid_argument"
