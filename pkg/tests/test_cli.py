import json
import subprocess
import sys

import pytest

from nlcorr import cli


def test_run_preset_csv(tmp_path, capsys):
    out = tmp_path / "o.csv"
    assert cli.main(["run", "--config", "vi_c", "--out", str(out), "--t-max", "5", "--t1", "2", "--t2", "4"]) == 0
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "t,XX,XI,IX"
    assert len(lines) == 1 + 501


def test_run_config_file_json(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"preset": "figure2", "t_max": 9, "observables": ["IX"], "emit_branches": False}))
    out = tmp_path / "o.json"
    assert cli.main(["run", "--config", str(cfg), "--out", str(out), "--stride", "100"]) == 0
    doc = json.loads(out.read_text(encoding="utf-8"))
    assert doc["config_echo"]["algorithm"] == "projection_standard"
    assert [s["label"] for s in doc["series"]] == ["IX"]


def test_figures_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(["figure1", "--out", str(a)]) == 0
    assert cli.main(["figure1", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    c = tmp_path / "c.csv"
    assert cli.main(["figure2", "--out", str(c)]) == 0
    assert "IX[+]" in c.read_text(encoding="utf-8").splitlines()[0]


def test_validation_exit_code(tmp_path, capsys):
    assert cli.main(["run", "--config", "vi_c", "--out", str(tmp_path / "o.csv"), "--dt", "0.5"]) == 1
    assert "dt: 0.5 is greater than the maximum of 0.01" in capsys.readouterr().err


def test_missing_config_exit_code(tmp_path, capsys):
    assert cli.main(["run", "--config", str(tmp_path / "none.json"), "--out", str(tmp_path / "o.csv")]) == 1
    assert "none.json" in capsys.readouterr().err


def test_unwritable_output(tmp_path, capsys):
    assert cli.main(["figure1", "--out", str(tmp_path / "no" / "o.csv")]) == 1
    assert "o.csv" in capsys.readouterr().err


def test_audit_pass(capsys):
    assert cli.main(["audit", "--config", "vi_c", "--perturb", "B=5", "--perturb", "t2=2", "--perturb", "axis2=z"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["passed"] and len(report["entries"]) == 3


def test_audit_fail(capsys):
    code = cli.main(["audit", "--config", "figure2", "--perturb", "axis1=z", "--target", "2"])
    assert code == 2
    report = json.loads(capsys.readouterr().out)
    assert report["entries"][0]["deviation"] > 1e-3


def test_audit_rejects_own_field(capsys):
    assert cli.main(["audit", "--config", "vi_c", "--perturb", "t1=1"]) == 1
    assert cli.main(["audit", "--config", "vi_c", "--perturb", "nonsense"]) == 1


def test_bad_subcommand():
    with pytest.raises(SystemExit) as info:
        cli.main(["plot"])
    assert info.value.code == 2


def test_module_entry_point(tmp_path):
    out = tmp_path / "f.csv"
    proc = subprocess.run([sys.executable, "-m", "nlcorr", "figure1", "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert out.exists()


@pytest.mark.slow
def test_check_command(capsys):
    assert cli.main(["check", "--seed", "0"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 9 and all(line.startswith("[PASS]") for line in lines)
