import json

import pytest

from almgren.cli import main, resolve_threads
from almgren.errors import ConfigError

PHI1_TOML = """
name = "phi1_zero"
s = 0.5
[domain]
N = 1
kind = "interval"
bounds = [[-1.0, 0.0]]
x0 = [0.0]
r0 = 0.5
[potential]
h = "pi"
[solution]
kind = "eigenfunction"
index = [1]
coefficient = 0.0
"""


def test_resolve_threads(monkeypatch):
    monkeypatch.delenv("ALMGREN_THREADS", raising=False)
    assert resolve_threads(None) == 1
    assert resolve_threads(3) == 3
    monkeypatch.setenv("ALMGREN_THREADS", "4")
    assert resolve_threads(None) == 4
    assert resolve_threads(2) == 2
    monkeypatch.setenv("ALMGREN_THREADS", "many")
    with pytest.raises(ConfigError):
        resolve_threads(None)
    with pytest.raises(ConfigError):
        resolve_threads(0)


def test_bad_env_threads_exit_code(monkeypatch, tmp_path):
    monkeypatch.setenv("ALMGREN_THREADS", "-2")
    assert main(["kernel", "--out-dir", str(tmp_path)]) == 2


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["run", "--format", "csv,pdf"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["nonsense"])
    assert exc.value.code == 2


def test_kernel_outputs(tmp_path, capsys):
    assert main(["kernel", "--s", "0.3", "--out-dir", str(tmp_path)]) == 0
    data = json.loads((tmp_path / "kernel_s0.3.json").read_text())
    assert data["passed"] and data["kappa_gap"] < 1e-6
    header = (tmp_path / "kernel_s0.3.csv").read_text().splitlines()[0]
    assert header == "xi,psi,dpsi"
    assert "kappa=" in capsys.readouterr().out


def test_eig_json_only(tmp_path):
    assert main(["eig", "--N", "1", "--s", "0.25", "--m-max", "3", "--format", "json", "--out-dir", str(tmp_path)]) == 0
    data = json.loads((tmp_path / "eig_N1_s0.25.json").read_text())
    assert [f["degree"] for f in data["functions"]] == [1, 3, 5]
    assert not (tmp_path / "eig_N1_s0.25.csv").exists()


def test_extend_phi1(tmp_path):
    assert main(["extend", "phi1_interval", "--points", "5", "--out-dir", str(tmp_path)]) == 0
    data = json.loads((tmp_path / "phi1_interval_extend.json").read_text())
    assert data["worst_relative_error"] < 1e-6


def test_run_and_report(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["run", "phi1_interval", "--threads", "2", "--out-dir", str(out)]) == 0
    assert "classified=True" in capsys.readouterr().out
    for name in ("phi1_interval.csv", "phi1_interval_blowup.csv", "phi1_interval.json", "phi1_interval.svg", "phi1_interval.timing.json"):
        assert (out / name).exists()
    again = tmp_path / "again"
    assert main(["report", str(out / "phi1_interval.json"), "--format", "csv,json", "--out-dir", str(again)]) == 0
    assert (again / "phi1_interval.json").read_text() == (out / "phi1_interval.json").read_text()
    assert (again / "phi1_interval.csv").read_text() == (out / "phi1_interval.csv").read_text()
    assert not (again / "phi1_interval.svg").exists()


def test_frequency_and_blowup_subcommands(tmp_path):
    assert main(["frequency", "phi1_interval", "--out-dir", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "phi1_interval_frequency.json").read_text())["m0"] == 1
    assert main(["blowup", "phi1_interval", "--m0", "1", "--out-dir", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "phi1_interval_blowup.json").read_text())["classified"]


def test_small_audit_reports_violation(tmp_path):
    # eight cases are too few to calibrate the trace constant for fresh data
    assert main(["audit", "--n", "8", "--out-dir", str(tmp_path)]) == 4
    data = json.loads((tmp_path / "inequality_audit.json").read_text())
    assert data["violations"]["hardy"] == 0 and not data["passed"]


def test_config_and_numeric_exit_codes(tmp_path, capsys):
    assert main(["run", "no_such_scenario", "--out-dir", str(tmp_path)]) == 2
    zero = tmp_path / "zero.toml"
    zero.write_text(PHI1_TOML)
    assert main(["run", str(zero), "--out-dir", str(tmp_path)]) == 3
    assert "scenario phi1_zero" in capsys.readouterr().err


def test_missing_report_is_config_error(tmp_path):
    assert main(["report", str(tmp_path / "absent.json"), "--out-dir", str(tmp_path)]) == 2


def test_unwritable_out_dir(tmp_path):
    blocker = tmp_path / "f"
    blocker.write_text("")
    assert main(["kernel", "--out-dir", str(blocker / "x")]) == 1
