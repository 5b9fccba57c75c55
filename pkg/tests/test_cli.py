import csv
import io
import json
import math
import os
import subprocess
import sys

import pytest

from ksselfsim import backend
from ksselfsim.cli import main


@pytest.fixture(autouse=True)
def _restore_backend():
    before = backend.active_backend()
    yield
    backend.set_backend(before)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_solve_json_layout(capsys):
    code, out, _ = run(capsys, "solve", "--a", "1", "--tau", "1", "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert set(doc) == {"config", "result", "diagnostics"}
    assert doc["config"]["a"] == 1.0 and doc["config"]["command"] == "solve"
    assert doc["result"]["mass_over_2pi"] >= 2 * (1 - math.exp(-2))
    assert doc["result"]["params"]["y_max"] == 120.0
    assert abs(doc["diagnostics"]["mass_identity_residual"]) < 1e-6


def test_solve_csv(capsys):
    code, out, _ = run(capsys, "solve", "--a", "1", "--tau", "1", "--ymax", "30", "--format", "csv")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["y", "phi", "dphi", "S"]
    assert float(rows[-1][0]) == 30.0


def test_solve_w_table(capsys):
    code, out, _ = run(capsys, "solve-w", "--s", "0", "--tau", "1", "--format", "table")
    assert code == 0
    assert "sigma" in out and "w_inf" in out


def test_sweep_and_mstar(capsys):
    code, out, _ = run(capsys, "sweep", "--tau", "10", "--a-min", "0.1", "--a-max", "1000",
                       "--n", "20", "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert len(doc["result"]["samples"]) == 20
    assert doc["diagnostics"]["envelope_violations"] == []
    code, out, _ = run(capsys, "mstar", "--tau", "0.5", "10", "--format", "csv")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [r["attained"] for r in rows] == ["false", "true"]
    assert float(rows[0]["m_star"]) == 4.0
    assert rows[0]["argmax_a"] == ""


def test_taustar(capsys):
    code, out, _ = run(capsys, "taustar", "--lo", "0.5", "--hi", "1", "--format", "json")
    assert code == 0
    res = json.loads(out)["result"]
    assert (res["lo"], res["hi"]) == (0.625, 0.640625)


def test_taustar_without_transition_is_usage_error(capsys):
    code, _, err = run(capsys, "taustar", "--lo", "10", "--hi", "20")
    assert code == 2
    assert "no transition" in err


def test_multiplicity(capsys):
    code, out, _ = run(capsys, "multiplicity", "--tau", "10", "--target", "4.5", "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert len(doc["result"]["roots"]) == 2
    assert max(doc["diagnostics"]["residuals"]) < 1e-6


def test_verify_passes(capsys):
    code, out, _ = run(capsys, "verify", "--a", "1", "--tau", "1")
    assert code == 0
    assert "mass_envelope" in out and "FAIL" not in out


def test_verify_reports_failures(capsys):
    # the first-order seed is not accurate enough close to the origin here
    code, _, err = run(capsys, "verify", "--a", "432.876", "--tau", "0.05", "--seed-order", "1")
    assert code == 1
    assert "FAILED" in err


def test_crosscheck(capsys):
    code, out, _ = run(capsys, "crosscheck", "--a", "1", "--tau", "1", "--format", "json")
    assert code == 0
    assert json.loads(out)["result"]["passed"] is True


def test_dirac_and_sdiagram(capsys):
    code, out, _ = run(capsys, "dirac", "--tau", "1", "--a", "100", "1000", "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert all(doc["diagnostics"].values())
    code, out, _ = run(capsys, "sdiagram", "--tau", "1", "--s-min", "-2", "--s-max", "2", "--n", "5")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["s", "log_sigma", "log_v0", "mass", "log1p_mass"]
    assert len(rows) == 6


@pytest.mark.parametrize(
    "argv",
    [
        ["solve", "--a", "-1", "--tau", "1"],
        ["solve", "--a", "nan", "--tau", "1"],
        ["solve", "--a", "1"],
        ["solve", "--a", "1", "--tau", "1", "--eps", "2"],
        ["sweep", "--tau", "1", "--a-min", "10", "--a-max", "1"],
        ["sweep", "--tau", "1", "--n", "2"],
        ["sdiagram", "--tau", "1", "--s-min", "3", "--s-max", "1"],
        ["mstar", "--tau", "1", "--jobs", "0"],
        ["frobnicate"],
    ],
)
def test_usage_errors(capsys, argv):
    code, _, _ = run(capsys, *argv)
    assert code == 2


def test_unwritable_output_path_fails_before_solving(capsys, tmp_path):
    target = tmp_path / "missing" / "out.json"
    code, out, err = run(capsys, "solve", "--a", "1", "--tau", "1", "-o", str(target))
    assert code == 2 and out == ""
    assert "cannot write" in err
    assert not target.exists()


def test_output_extension_selects_format(capsys, tmp_path):
    path = tmp_path / "m.csv"
    assert run(capsys, "mstar", "--tau", "10", "-o", str(path))[0] == 0
    assert path.read_text().startswith("tau,m_star,")
    path = tmp_path / "p.json"
    assert run(capsys, "solve", "--a", "1", "--tau", "1", "-o", str(path), "--format", "json")[0] == 0
    assert "result" in json.loads(path.read_text())


def test_output_file_and_determinism(capsys, tmp_path):
    path = tmp_path / "a.json"
    assert run(capsys, "solve", "--a", "2", "--tau", "0.7", "--format", "json", "-o", str(path))[0] == 0
    doc = json.loads(path.read_text())
    assert doc["config"]["output"] == str(path)
    first = run(capsys, "solve", "--a", "2", "--tau", "0.7", "--format", "json")[1]
    second = run(capsys, "solve", "--a", "2", "--tau", "0.7", "--format", "json")[1]
    assert first == second
    assert json.loads(first)["result"] == doc["result"]


@pytest.mark.skipif("compiled" not in backend.available_backends(), reason="extension not built")
def test_backends_give_identical_output(capsys):
    outs = []
    for name in ("compiled", "python"):
        code, out, _ = run(capsys, "solve", "--a", "3", "--tau", "2", "--backend", name)
        assert code == 0
        doc = json.loads(out)
        assert doc["config"]["backend"] == name
        outs.append((doc["result"], doc["diagnostics"]))
    assert outs[0] == outs[1]


def test_module_entry_point():
    env = dict(os.environ)
    proc = subprocess.run(
        [sys.executable, "-m", "ksselfsim", "solve", "--a", "1", "--tau", "1", "--format", "table"],
        capture_output=True, text=True, env=env, check=False,
    )
    assert proc.returncode == 0, proc.stderr
    assert "mass_over_2pi" in proc.stdout


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
