import csv
import io
import json
import subprocess
import sys

import pytest

from sepsplit.cli import run


def call(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_formal_json_is_exact(capsys):
    code, out, _ = call(capsys, "formal", "--order", "3")
    assert code == 0
    obj = json.loads(out)
    assert obj["p"][0] == ["-1/2", "3/2"]
    assert obj["mu"][2] == "1/4"


def test_equilibrium_row(capsys):
    code, out, _ = call(capsys, "equilibrium", "--mu", "0.04", "--nu", "0")
    assert code == 0
    (r,) = rows(out)
    assert float(r["x1"]) == pytest.approx(-0.2)
    assert float(r["lambda"]) == pytest.approx(0.4 ** 0.5)
    assert float(r["residual"]) < 1e-30


def test_trace_energy_column(capsys):
    code, out, _ = call(capsys, "trace", "--mu", "0.05", "--nu", "0.01")
    assert code == 0
    assert max(float(r["energy_error"]) for r in rows(out)) < 1e-25


def test_melnikov_sweep(capsys):
    code, out, _ = call(capsys, "melnikov", "--m", "1", "--eps", "0.3,0.4,0.5")
    assert code == 0
    table = rows(out)
    assert len(table) == 3
    assert all(float(r["rel_diff_exact"]) <= 1e-8 for r in table)


def test_split_sorted_and_null(capsys):
    code, out, _ = call(capsys, "split", "--mu", "0.2,0.1", "--nu", "0")
    assert code == 0
    table = rows(out)
    assert [float(r["mu"]) for r in table] == [0.1, 0.2]
    assert all(r["upper_bound"] == "true" or float(r["E_e1"]) == 0 for r in table)


def test_split_json_deterministic(capsys, tmp_path):
    args = ["split", "--lam", "0.6", "--nu", "0.01", "--format", "json"]
    outs = []
    for i in range(2):
        f = tmp_path / f"o{i}.json"
        assert run(args + ["--out", str(f)]) == 0
        outs.append(f.read_bytes())
    assert outs[0] == outs[1]
    obj = json.loads(outs[0])
    assert obj["precision"] == 128
    assert float(obj["rows"][0]["lambda"]) == pytest.approx(0.6)


def test_stokes_json(capsys):
    code, out, _ = call(capsys, "stokes", "--model", "inner_cubic", "--nu", "0.01",
                        "--tau-match", "30")
    assert code == 0
    obj = json.loads(out)
    assert float(obj["b0"][0]) == pytest.approx(0.12566, rel=1e-4)
    assert "rate" in obj["fit"]


def test_verify_exit_zero(capsys):
    code, out, _ = call(capsys, "verify")
    assert code == 0
    assert "FAIL" not in out


@pytest.mark.parametrize("argv", [
    ["split", "--mu", "abc"],
    ["split"],
    ["equilibrium", "--mu", "0.1", "--precision", "32"],
    ["frobnicate"],
    ["formal", "--model", "/nonexistent.ham"],
])
def test_usage_errors(capsys, argv):
    code, _, err = call(capsys, *argv)
    assert code == 2


def test_malformed_model(capsys, tmp_path):
    bad = tmp_path / "bad.ham"
    bad.write_text("1 0 0 0 0 0\n")
    code, _, err = call(capsys, "formal", "--model", str(bad))
    assert code == 2


def test_computation_error_json(capsys):
    # the quartic model has no saddle for mu > 4/27
    code, _, err = call(capsys, "equilibrium", "--model", "quartic", "--mu", "0.5")
    assert code == 1
    assert json.loads(err)["error"] == "computation"


def test_module_entry_point():
    p = subprocess.run([sys.executable, "-m", "sepsplit", "melnikov", "--m", "2", "--eps", "0.4"],
                       capture_output=True, text=True, check=True)
    assert p.stdout.startswith("eps,")
