import json
import subprocess
import sys

import pytest

from majorminor.builtins import three_path_example
from majorminor.cli import main
from majorminor.instances import random_scenario
from majorminor.scenario import save_scenario


def run(*args):
    return main([str(a) for a in args])


def test_solve_writes_report(tmp_path, capsys):
    out = tmp_path / "run1"
    assert run("solve", "--scenario", "builtin:paper-ex-2.1", "--lambda", "0.05", "--tol", "1e-8",
               "--out", out) == 0
    assert (out / "report.json").is_file() and (out / "flow.csv").is_file()
    assert "converged" in capsys.readouterr().out


def test_json_format_writes_report_only(tmp_path):
    out = tmp_path / "r"
    assert run("solve", "--scenario", "builtin:decoupled-toy", "--format", "json", "--out", out) == 0
    assert sorted(p.name for p in out.iterdir()) == ["report.json"]


def test_verbose_prints_iterations(tmp_path, capsys):
    run("solve", "--scenario", "builtin:decoupled-toy", "--out", tmp_path / "r", "--verbose")
    err = capsys.readouterr().err
    assert err.count("iter=") == 2


def test_input_errors_leave_no_output(tmp_path, capsys):
    out = tmp_path / "never"
    assert run("solve", "--scenario", "builtin:paper-ex-2.1", "--lambda", "0", "--out", out) == 1
    assert "anneal" in capsys.readouterr().err
    assert run("solve", "--scenario", tmp_path / "missing.json", "--out", out) == 1
    assert "scenario not found" in capsys.readouterr().err
    assert run("solve", "--scenario", "builtin:paper-ex-2.1", "--damping", "2", "--out", out) == 1
    assert run("frobnicate") == 1
    assert not out.exists()


def test_worker_override_validated(tmp_path, monkeypatch):
    monkeypatch.setenv("MAJORMINOR_WORKERS", "0")
    assert run("scenarios") == 1
    monkeypatch.setenv("MAJORMINOR_WORKERS", "4")
    assert run("scenarios") == 0


def test_not_converged_exit_code(tmp_path):
    assert run("solve", "--scenario", "builtin:bankrun-toy", "--max-iters", "2", "--out", tmp_path / "r") == 2
    assert (tmp_path / "r" / "report.json").is_file()


def test_verify_exit_codes(tmp_path, capsys):
    out = tmp_path / "r"
    run("anneal", "--scenario", "builtin:paper-ex-2.1", "--out", out)
    capsys.readouterr()
    assert run("verify", out / "report.json", "--eps", "1e-3") == 0
    text = capsys.readouterr().out
    assert "major" in text and "slack" in text
    doc = json.loads((out / "report.json").read_text())
    doc["alpha"] = [[[0.0 for _ in row] for row in s] for s in doc["alpha"]]
    bad = tmp_path / "tampered.json"
    bad.write_text(json.dumps(doc))
    assert run("verify", bad) == 2
    assert "major" in capsys.readouterr().err
    doc = json.loads((out / "report.json").read_text())
    doc["mu"] = doc["mu"][:-1]
    bad.write_text(json.dumps(doc))
    assert run("verify", bad) == 1


def test_verify_tight_eps(tmp_path):
    out = tmp_path / "r"
    run("solve", "--scenario", "builtin:bankrun-toy", "--lambda", "0.2", "--out", out)
    assert run("verify", out / "report.json", "--eps", "1e-6") == 0
    assert run("verify", out / "report.json", "--eps", "1e-13") == 2


def test_oracle(tmp_path, capsys):
    assert run("oracle", "--scenario", "builtin:paper-ex-2.1", "--stop-at", "1", "--out", tmp_path) == 0
    doc = json.loads((tmp_path / "oracle.json").read_text())
    assert doc["oracle_value"] == 1.0 and doc["dp_value"] == 1.0
    assert run("oracle", "--scenario", "builtin:bankrun-toy") == 3
    assert run("oracle", "--scenario", "builtin:control-toy-coupled", "--out", tmp_path / "c") == 0


def test_oracle_on_random_file(tmp_path):
    import numpy as np
    sc = random_scenario(np.random.default_rng(3), n_minor=2, n_major=2, horizon=2)
    path = tmp_path / "s.json"
    save_scenario(sc, path)
    assert run("oracle", "--scenario", path, "--out", tmp_path / "o") == 0
    doc = json.loads((tmp_path / "o" / "oracle.json").read_text())
    assert abs(doc["oracle_value"] - doc["dp_value"]) <= 1e-9


def test_export(tmp_path):
    assert run("export", "--scenario", "builtin:paper-ex-2.1", "--out", tmp_path / "e") == 0
    assert json.loads((tmp_path / "e" / "scenario.json").read_text())["name"] == "paper-ex-2.1"
    run("solve", "--scenario", "builtin:control-toy", "--out", tmp_path / "r", "--format", "json")
    assert run("export", tmp_path / "r" / "report.json", "--out", tmp_path / "x") == 0
    assert (tmp_path / "x" / "state_action.csv").is_file()


def test_control_anneal_and_verify(tmp_path):
    out = tmp_path / "c"
    assert run("anneal", "--scenario", "builtin:control-toy-coupled", "--out", out) == 0
    assert run("verify", out / "report.json") == 0


def test_identical_invocations_are_byte_identical(tmp_path):
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        assert run("anneal", "--scenario", "builtin:bankrun-toy", "--seed", "3", "--out", out) == 0
    names = sorted(p.name for p in outs[0].iterdir())
    assert names == sorted(p.name for p in outs[1].iterdir())
    for name in names:
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "majorminor", "scenarios"], capture_output=True, text=True)
    assert res.returncode == 0 and "builtin:paper-ex-2.1" in res.stdout
