import csv
import io
import json
import math
import subprocess
import sys

import pytest

from shiftmetric import cli
from shiftmetric.cli import main, parse_lengths


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize(
    "text, expected",
    [("1,2,inf", [1, 2, math.inf]), ("log3, log(3)", [math.log(3)] * 2), ("[1, 2.5]", [1, 2.5]), ("1e-3,2", [1e-3, 2])],
)
def test_parse_lengths(text, expected):
    assert parse_lengths(text).tolist() == pytest.approx(expected)


@pytest.mark.parametrize("text", ["", "1,,2", "abc", "[1, 2"])
def test_parse_lengths_rejects(text):
    with pytest.raises(cli.UsageError):
        parse_lengths(text)


def test_heights(capsys):
    code, out, _ = run(capsys, "heights", '{"degree": 2, "coeffs": [1e6]}')
    assert code == 0
    obj = json.loads(out)
    assert obj["heights"][0] == pytest.approx(0.5 * math.log(1e6), abs=1e-3)
    assert obj["shift_locus"] is True


def test_heights_not_shift_locus(capsys):
    code, out, _ = run(capsys, "heights", '{"degree": 3, "coeffs": [0, 0]}')
    assert code == 0
    assert json.loads(out)["note"] == "not shift locus"


def test_heights_from_file(capsys, tmp_path):
    f = tmp_path / "p.json"
    f.write_text('{"degree": 2, "coeffs": [[0, 10]]}')
    code, out, _ = run(capsys, "heights", f"@{f}")
    assert code == 0 and json.loads(out)["degree"] == 2


@pytest.mark.parametrize("arg", ['{"degree": 2', '{"degree": 2}', '{"degree": 1, "coeffs": []}', "@/nonexistent"])
def test_heights_bad_input(capsys, arg):
    code, _, err = run(capsys, "heights", arg)
    assert code == 2 and err.startswith("error")


def test_usage_errors(capsys):
    assert run(capsys)[0] == 2
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "entropy")[0] == 2
    assert run(capsys, "entropy", "--lengths", "1,2", "--tol", "-1")[0] == 2
    assert run(capsys, "entropy", "--lengths", "1,2", "--method", "nope")[0] == 2


@pytest.mark.parametrize("lengths, expected", [("log3,log3", 1.0), ("1,1,1,1", math.log(7)), ("2,inf,2", math.log(3) / 2)])
def test_entropy(capsys, lengths, expected):
    code, out, _ = run(capsys, "entropy", "--lengths", lengths)
    assert code == 0
    assert float(out) == pytest.approx(expected, rel=1e-12)


def test_entropy_numerical_failure(capsys):
    code, _, err = run(capsys, "entropy", "--lengths", "1,inf")
    assert code == 1 and "DegenerateEntropyError" in err


def test_entropy_fault_injection(capsys, monkeypatch):
    from shiftmetric.rosemetric import thermo

    real = thermo.entropy

    def broken(ell, method="spectral", **kw):
        h = real(ell, method=method, **kw)
        return h * 1.01 if method == "det" else h

    import shiftmetric.rosemetric as rm

    monkeypatch.setattr(rm, "entropy", broken)
    code, out, err = run(capsys, "entropy", "--lengths", "1,2,3")
    assert code == 1 and out == ""
    diag = json.loads(err)
    assert diag["error"] == "entropy methods disagree"
    assert diag["spread"] > 1e-3


def test_norm(capsys, tmp_path):
    code, out, _ = run(capsys, "norm", "--lengths", "1,2,3", "--vector", "1,0,-1")
    assert code == 0
    obj = json.loads(out)
    assert obj["norm_sq"] > 0 and obj["norm"] == pytest.approx(math.sqrt(obj["norm_sq"]))
    a = run(capsys, "norm", "--lengths", "1,2,3", "--seed", "5")[1]
    b = run(capsys, "norm", "--lengths", "1,2,3", "--seed", "5")[1]
    assert a == b
    assert run(capsys, "norm", "--lengths", "1,2,3", "--vector", "1,0")[0] == 2


def test_distance(capsys):
    code, out, _ = run(capsys, "distance", "--lengths-a", "1,2,3", "--lengths-b", "1,2,3")
    assert code == 0 and json.loads(out)["distance"] == 0.0
    ab = json.loads(run(capsys, "distance", "--lengths-a", "1,2,3", "--lengths-b", "3,1,1", "--refine", "1")[1])
    ba = json.loads(run(capsys, "distance", "--lengths-a", "3,1,1", "--lengths-b", "1,2,3", "--refine", "1")[1])
    assert ab["tag"] == "upper-bound"
    assert ab["distance"] == pytest.approx(ba["distance"], rel=1e-6)
    h = ab["history"]
    assert all(x >= y for x, y in zip(h, h[1:]))


def test_distance_heights(capsys):
    code, out, _ = run(capsys, "distance", "--heights-a", "2", "--heights-b", "2", "--twist-a", "0", "--twist-b", "0.5")
    assert code == 0
    obj = json.loads(out)
    assert obj["kind"] == "shift-locus" and obj["distance"] > 0
    assert run(capsys, "distance", "--heights-a", "2")[0] == 2
    assert run(capsys, "distance")[0] == 2


def test_sweep_csv_and_determinism(capsys, tmp_path):
    code, out, _ = run(capsys, "sweep-s2", "--levels", "20", "--samples", "32")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["h", "length", "samples"]
    assert float(rows[1][0]) == 20 and float(rows[1][1]) > 0 and rows[1][2] == "32"
    f = tmp_path / "s.csv"
    assert main(["sweep-s2", "--levels", "20", "--samples", "32", "--out", str(f)]) == 0
    assert f.read_text() == out
    assert run(capsys, "sweep-s2", "--levels", "0,1")[0] == 2
    assert run(capsys, "sweep-s2", "--samples", "1")[0] == 2


def test_regimes(capsys, tmp_path):
    f = tmp_path / "r.csv"
    code, out, _ = run(capsys, "regimes", "cubic-2b", "cubic-1", "--out", str(f))
    assert code == 0
    summary = json.loads(out)
    assert [s["classification"] for s in summary] == ["cauchy", "divergent"]
    rows = list(csv.DictReader(f.open()))
    assert {r["family"] for r in rows} == {"cubic-2b", "cubic-1"}
    code, out, err = run(capsys, "regimes", '{"D": 2, "heights": ["k"], "kGrid": [10, 100, 1000]}')
    assert code == 0 and out.startswith("family,k")
    assert json.loads(err)[0]["D"] == 2
    assert run(capsys, "regimes", "{bad json")[0] == 2
    assert run(capsys, "regimes", '{"D": 3, "heights": ["k"]}')[0] == 1


def test_module_entry_point():
    r = subprocess.run(
        [sys.executable, "-m", "shiftmetric", "entropy", "--lengths", "log3,log3"],
        capture_output=True, text=True, timeout=60,
    )
    assert r.returncode == 0 and float(r.stdout) == pytest.approx(1.0)
    r = subprocess.run([sys.executable, "-m", "shiftmetric", "--help"], capture_output=True, text=True, timeout=60)
    assert r.returncode == 0 and "sweep-s2" in r.stdout
