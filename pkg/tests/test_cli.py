from __future__ import annotations

import csv
import io
import json
import subprocess
import sys

import pytest

from discflow.cli import main
from discflow.spec_io import dumps, parse_spec


def run(capsys, *argv):
    code = main(list(argv))
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_flow_rows(capsys):
    code, out, _ = run(capsys, "flow", "example_1_4", "--x0", "0", "--t", "0,1,2")
    assert code == 0
    assert rows(out) == [["t", "x"], ["0", "0"], ["1", "1"], ["2", "4"]]


def test_unknown_command_is_usage_error(capsys):
    with pytest.raises(SystemExit) as e:
        main(["frobnicate", "example_1_4"])
    assert e.value.code == 2


def test_missing_spec_is_error(capsys):
    code, _, err = run(capsys, "flow", "no_such_problem", "--x0", "0")
    assert code == 3 and "error" in err


def test_branch_point_without_direction_is_error(tmp_path, capsys):
    doc = json.loads(dumps(parse_spec("branching")))
    doc["branching"]["theta"] = [0.5]
    path = tmp_path / "half.spec"
    path.write_text(json.dumps(doc))
    # theta strictly inside (0, 1) gives the deterministic flow no direction
    code, _, err = run(capsys, "flow", str(path), "--x0", "0", "--t", "1")
    assert code == 3 and "direction" in err


def test_classify(capsys):
    code, out, _ = run(capsys, "classify", "branching")
    assert code == 0 and "0" in out and "branch" in out


def test_kernel_outputs(tmp_path, capsys):
    code, _, _ = run(capsys, "kernel", "example_1_4", "--x0", "0", "--t", "1", "--out", str(tmp_path))
    assert code == 0
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["command"] == "kernel" and man["spec"]["name"] == "example_1_4"
    assert all((tmp_path / f).exists() for f in man["outputs"])


def test_sample_reproducible(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run(capsys, "sample", "example_1_4", "--x0", "0", "--n", "300", "--seed", "5", "--out", str(d))[0] == 0
    assert (a / "ecdf.csv").read_text() == (b / "ecdf.csv").read_text()
    ma, mb = (json.loads((d / "manifest.json").read_text()) for d in (a, b))
    assert ma["seed"] == mb["seed"] == 5 and ma["spec"] == mb["spec"]


def test_sample_paths_need_out(capsys):
    code, _, _ = run(capsys, "sample", "example_1_4", "--x0", "0", "--n", "2", "--paths")
    assert code == 3


def test_sample_paths_files(tmp_path, capsys):
    code, _, _ = run(capsys, "sample", "example_1_4", "--x0", "0", "--n", "3", "--paths", "--out", str(tmp_path))
    assert code == 0
    assert sorted(p.name for p in tmp_path.glob("path_*.csv")) == ["path_0.csv", "path_1.csv", "path_2.csv"]


def test_verify_ck_passes(capsys):
    code, out, err = run(capsys, "verify", "example_1_4", "--suite", "ck", "--cases", "3")
    assert code == 0 and json.loads(out)["passed"] and "PASS" in err


def test_verify_semigroup_writes_report(tmp_path, capsys):
    code, _, _ = run(capsys, "verify", "branching", "--suite", "semigroup", "--samples", "200", "--out", str(tmp_path))
    assert code == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["name"] == "semigroup" and rep["max_residual"] <= rep["tol"]


def test_export_round_trip(tmp_path, capsys):
    code, out, _ = run(capsys, "export", "cantor")
    assert code == 0
    (tmp_path / "c.spec").write_text(out)
    assert dumps(parse_spec(tmp_path / "c.spec")) == out


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "discflow.cli", "flow", "example_1_4", "--x0", "1", "--t", "1"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.splitlines()[1] == "1,4"
