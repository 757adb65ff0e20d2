import csv
import hashlib
import json
import os
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from paneitz import __version__
from paneitz import cli


def _run(args):
    return cli.main(args)


def _files(directory):
    return sorted(str(p.relative_to(directory)) for p in Path(directory).rglob("*") if p.is_file())


def _manifest(directory):
    return json.loads((Path(directory) / "manifest.json").read_text())


FAST = {
    "curvature": ["--set", "points=3", "--set", "n=5"],
    "covariance": ["--set", "n=5", "--set", "points=2"],
    "lemma31": [],
    "gap": [],
    "kazdan-warner": ["--set", "fields=2", "--set", "K=16"],
    "flow": ["--set", "K=16", "--set", "T_max=4", "--set", "checkpoint_every=2"],
}


@pytest.mark.parametrize("experiment", sorted(FAST))
def test_experiment_outputs_and_manifest(experiment, tmp_path):
    out = tmp_path / experiment
    assert _run([experiment, "--out", str(out), *FAST[experiment]]) == 0
    man = _manifest(out)
    listed = sorted(f["name"] for f in man["files"])
    assert listed == [f for f in _files(out) if f != "manifest.json"]
    for f in man["files"]:
        data = (out / f["name"]).read_bytes()
        assert hashlib.sha256(data).hexdigest() == f["sha256"] and len(data) == f["bytes"]
    assert man["version"] == __version__ and man["experiment"] == experiment
    assert man["started"] <= man["finished"]
    assert man["checks"] and all({"check", "passed", "value", "tolerance"} <= set(c)
                                 for c in man["checks"])
    assert not list(out.rglob("*.tmp"))


@pytest.mark.parametrize("experiment", ["kazdan-warner", "gap", "flow"])
def test_rerun_is_byte_identical(experiment, tmp_path):
    for name in ("a", "b"):
        assert _run([experiment, "--out", str(tmp_path / name), "--seed", "5",
                     *FAST[experiment]]) == 0
    for f in _files(tmp_path / "a"):
        if f.endswith(".csv"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_seed_changes_random_fields(tmp_path):
    for seed in ("1", "2"):
        _run(["kazdan-warner", "--out", str(tmp_path / seed), "--seed", seed, *FAST["kazdan-warner"]])
    assert (tmp_path / "1" / "kazdan_warner.csv").read_text() != (
        tmp_path / "2" / "kazdan_warner.csv").read_text()


def test_csv_full_precision(tmp_path):
    _run(["lemma31", "--out", str(tmp_path)])
    rows = list(csv.DictReader(open(tmp_path / "lemma31.csv")))
    assert {"alpha", "value", "value_over_log_alpha"} <= set(rows[0])
    for row in rows:
        text = row["value"]
        assert format(float(text), ".17g") == text
    checks = {c["check"]: c for c in _manifest(tmp_path)["checks"]}
    assert checks["fitted C2 (slope in log alpha)"]["value"] > 0


def test_gap_experiment_rows(tmp_path, capsys):
    assert _run(["gap", "--out", str(tmp_path), "--set", "n=10", "--set", "alphas=1e-2,3e-3,1e-3",
                 "--set", "epsilon=0.1", "--set", "W2=1"]) == 0
    rows = list(csv.DictReader(open(tmp_path / "gap.csv")))
    assert len(rows) == 3
    assert {"n", "alpha", "epsilon", "W2", "bound", "q_sphere", "relative_gap"} <= set(rows[0])
    assert "bound < q(S^10)" in capsys.readouterr().out


def test_config_file_with_comments(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# lemma sweep\nn = 10\nalphas = 1e-2, 1e-3  # two points\n\nepsilon=0.5\n")
    assert _run(["lemma31", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    man = _manifest(tmp_path / "o")
    assert man["config"]["n"] == 10 and man["config"]["alphas"] == [1e-2, 1e-3]
    assert len(list(csv.DictReader(open(tmp_path / "o" / "lemma31.csv")))) == 2


def test_set_overrides_config(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("n = 10\n")
    _run(["lemma31", "--config", str(cfg), "--set", "n=12", "--out", str(tmp_path / "o")])
    assert _manifest(tmp_path / "o")["config"]["n"] == 12


def test_empty_alpha_grid(tmp_path):
    out = tmp_path / "gap"
    assert _run(["gap", "--set", "alphas=", "--out", str(out)]) == 2
    assert not out.exists()


@pytest.mark.parametrize("args", [
    ["gap", "--set", "unknown=1"],
    ["gap", "--set", "n=eight"],
    ["gap", "--set", "n=6"],
    ["flow", "--set", "dt_min=1", "--set", "dt_init=0.1"],
    ["curvature", "--set", "chart=torus"],
    ["gap", "--set", "noequals"],
    ["lemma31", "--set", "alphas=0.1,0.1"],
])
def test_invalid_config(args, tmp_path):
    assert _run([*args, "--out", str(tmp_path / "o")]) == 2
    assert not (tmp_path / "o").exists()


def test_malformed_config_file(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("this is not a pair\n")
    assert _run(["gap", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert _run(["verify-all", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert _run(["gap", "--config", str(tmp_path / "missing.cfg")]) == 2


def test_numerical_failure(tmp_path):
    out = tmp_path / "flow"
    code = _run(["flow", "--out", str(out), "--set", "K=8", "--set", "normalization=quotient",
                 "--set", "T_max=20"])
    assert code == 3
    man = _manifest(out)
    assert man["status"] == "numerical-failure"
    assert man["checks"][0]["passed"] is False and "StepUnderflowError" in man["checks"][0]["value"]
    assert _files(out) == ["manifest.json"]


def test_io_failure(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert _run(["lemma31", "--out", str(blocker / "sub")]) == 4


def test_env_output_root(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ROOT_ENV, str(tmp_path / "root"))
    assert _run(["lemma31"]) == 0
    assert (tmp_path / "root" / "lemma31" / "manifest.json").exists()


def test_usage_error():
    assert _run(["no-such-experiment"]) == 2


def test_verify_all_tightened_tolerance(tmp_path, capsys):
    base = tmp_path / "base"
    tight = tmp_path / "tight"
    _run(["verify-all", "--out", str(base)])
    code = _run(["verify-all", "--out", str(tight), "--set", "kazdan_warner.tol=1e-16"])
    assert code == 1
    table = capsys.readouterr().out
    assert "5.kazdan_warner" in table and "tolerance" in table

    def failing(d):
        return {c["check"] for c in _manifest(d)["checks"][:-1] if not c["passed"]}

    assert failing(tight) - failing(base) == {"5.kazdan_warner"}
    assert failing(base) - failing(tight) == set()


def test_verify_all_unknown_parameter(tmp_path):
    assert _run(["verify-all", "--set", "gap.bogus=1", "--out", str(tmp_path)]) == 2


def test_atomic_write_replaces(tmp_path):
    target = tmp_path / "x.txt"
    cli.atomic_write(target, "one")
    cli.atomic_write(target, "two")
    assert target.read_text() == "two" and _files(tmp_path) == ["x.txt"]


def test_console_script():
    exe = shutil.which("paneitz")
    cmd = [exe] if exe else [sys.executable, "-m", "paneitz.cli"]
    out = subprocess.run([*cmd, "--version"], capture_output=True, text=True, check=True)
    assert out.stdout.strip() == __version__
