import json
import subprocess
import sys

import pytest

from tslyap.cli import USAGE_ERROR, main

EX2 = ["--fixture", "example2", "--a", "-8", "--b", "100"]


def run(tmp_path, *argv):
    return main(list(argv) + (["--out", str(tmp_path)] if argv[0] not in ("reproduce",) else []))


def test_check_vertex_feasible(tmp_path, capsys):
    assert run(tmp_path, "check", *EX2, "--condition", "vertex", "--b-bound", "0.2603") == 0
    assert "feasible" in capsys.readouterr().out
    cert = json.loads((tmp_path / "certificate.json").read_text())
    assert cert["status"] == "feasible" and "P" in cert["certificate"]
    assert cert["manifest"] == "manifest.json"
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["command"] == "check" and man["params"] == {"a": -8.0, "b": 100.0}
    assert man["hyperparameters"] == {"b": [0.2603]}
    assert man["outputs"] == ["certificate.json"]


def test_check_cubic_not_feasible(tmp_path):
    assert run(tmp_path, "check", "--fixture", "cubic", "--condition", "mozelli", "--phi", "1") in (1, 2)


def test_check_vdp_ball(tmp_path):
    assert run(tmp_path, "check", "--fixture", "vdp", "--mu", "-2", "--condition", "ball", "--eta", "1e-4") == 0


def test_solver_flags(tmp_path):
    code = run(tmp_path, "check", *EX2, "--condition", "mozelli", "--phi", "1", "--sdp-iters", "300",
               "--sdp-tol", "1e-7", "--sdp-restarts", "2", "--eps", "1e-5")
    assert code == 0
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["solver_options"]["max_iters"] == 300 and man["solver_options"]["restarts"] == 2


@pytest.mark.parametrize("argv", [
    ["check", "--fixture", "cubic", "--condition", "bogus"],
    ["check", "--fixture", "cubic"],
    ["check", "--fixture", "nope", "--condition", "qlf"],
    ["check", "--fixture", "cubic", "--a", "1", "--condition", "qlf"],
    ["check", "--fixture", "cubic", "--condition", "vertex"],
    ["check", "--fixture", "cubic", "--condition", "vertex", "--b-bound", "x"],
    ["sweep", "--condition", "qlf", "--grid", "11by11"],
    ["reproduce", "--only", "99"],
    [],
])
def test_usage_errors(tmp_path, argv):
    if argv and argv[0] != "reproduce":
        argv = argv + ["--out", str(tmp_path)]
    with pytest.raises(SystemExit) as exc:
        raise SystemExit(main(argv))
    assert exc.value.code == USAGE_ERROR


def test_maximize_vertex(tmp_path, capsys):
    assert run(tmp_path, "maximize", *EX2, "--condition", "vertex", "--b-bound", "0.1", "--tol", "1e-2") == 0
    out = capsys.readouterr().out
    assert out.startswith("b* = ")
    assert float(out.split()[2]) == pytest.approx(0.2603, rel=0.02)
    doc = json.loads((tmp_path / "maximize.json").read_text())
    assert doc["param"] == "b" and doc["hi"] - doc["lo"] <= 1e-2 * doc["hi"]


def test_maximize_no_bracket(tmp_path):
    assert run(tmp_path, "maximize", "--fixture", "cubic", "--condition", "vertex", "--b-bound", "0.1",
               "--lo", "0.01") == 1


def test_sweep_outputs(tmp_path, capsys):
    code = run(tmp_path, "sweep", "--condition", "vertex", "--b-bound", "0.1", "--grid", "3x3")
    assert code == 0
    for name in ("sweep.csv", "sweep.svg", "reference.csv", "manifest.json"):
        assert (tmp_path / name).exists()
    assert len((tmp_path / "sweep.csv").read_text().splitlines()) == 10
    assert json.loads((tmp_path / "manifest.json").read_text())["grid"] == [3, 3]
    assert "vs" in capsys.readouterr().out


def test_da_outputs(tmp_path, capsys):
    code = run(tmp_path, "da", *EX2, "--condition", "ball", "--eta", "0.16", "--resolution", "101")
    assert code == 0
    doc = json.loads((tmp_path / "da.json").read_text())
    assert doc["level"] > 0 and doc["region"] == "U(0.16)"
    assert (tmp_path / "da.svg").exists() and (tmp_path / "da.csv").exists()
    assert capsys.readouterr().out.startswith("c* = ")


def test_da_infeasible_condition(tmp_path):
    assert run(tmp_path, "da", *EX2, "--condition", "ball", "--eta", "1.1645") in (1, 2)


def test_validate_small(tmp_path):
    code = run(tmp_path, "validate", "--fixture", "vdp", "--mu", "-2", "--condition", "vertex",
               "--b-bound", "0.05", "--resolution", "101", "--samples", "20", "--horizon", "30", "--dt", "0.01")
    assert code == 0
    audit = json.loads((tmp_path / "audit.json").read_text())
    assert audit["samples"] == 20 and audit["flags"] == []


def test_reproduce_list(capsys):
    assert main(["reproduce", "--list"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 7 and out[0].startswith("1.")


def test_reproduce_single(tmp_path, capsys):
    assert main(["reproduce", "--only", "7", "--out", str(tmp_path / "r.json")]) == 0
    assert "[PASS] criterion 7" in capsys.readouterr().out
    assert json.loads((tmp_path / "r.json").read_text())[0]["passed"]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "tslyap", "reproduce", "--list"], capture_output=True, text=True)
    assert proc.returncode == 0 and "integrator oracle" in proc.stdout
