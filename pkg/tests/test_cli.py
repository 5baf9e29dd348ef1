import csv
import io
import json

import numpy as np
import pytest

from randbound.cli import CSV_COLUMNS, main
from randbound.ell2 import KG
from randbound.spaces import diagonal_c0_family, make_family, save_family
from randbound.suites import row_passes

FAST = ["--samples", "2000", "--budget", "4", "--no-timestamp"]


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_verify_diag(capsys):
    code, out, _ = run(capsys, "verify", "diag-exact", "--a", "3,4", *FAST)
    rep = json.loads(out)
    assert code == 0 and rep["pass"] and rep["schemaVersion"] == 1
    row = rep["rows"][0]
    assert abs(row["lower"] - 5) <= 1e-6 and row["upper"] == 5.0


def test_verify_sudakov_n1(capsys):
    code, out, _ = run(capsys, "verify", "sudakov", "--n", "1", *FAST)
    assert code == 0
    assert json.loads(out)["rows"][0]["lower"] == 0.0


def test_verify_komatsu(capsys):
    code, out, _ = run(capsys, "verify", "komatsu", *FAST)
    rep = json.loads(out)
    assert code == 0 and len(rep["rows"]) == 101


def test_unknown_suite(capsys):
    assert run(capsys, "verify", "nonsense")[0] == 2


def test_gap(capsys):
    code, out, _ = run(capsys, "gap", "2", "4", "1024", *FAST)
    rep = json.loads(out)
    assert code == 0 and rep["ratio_floor_increasing"]
    r2, _, r1024 = rep["rows"]
    assert r2["r_lower"] == pytest.approx(2 ** 0.5)
    assert r2["bracket_lower"] == pytest.approx(0.8493218, rel=1e-6)
    assert r1024["r_lower"] == pytest.approx(32.0)
    assert r1024["ratio_floor"] == pytest.approx(0.6581922, rel=1e-6)


def test_gap_rejects_small_n(capsys):
    assert run(capsys, "gap", "1", *FAST)[0] == 2


def test_bound(tmp_path, capsys):
    p = tmp_path / "id.json"
    save_family(make_family(np.eye(2), name="identity"), p)
    code, out, _ = run(capsys, "bound", str(p), "ell2", *FAST)
    row = json.loads(out)["rows"][0]
    assert code == 0 and row["lower"] >= 1.0 and row["upper"] == pytest.approx(KG)
    q = tmp_path / "diag.json"
    save_family(diagonal_c0_family([1, 1, 1, 1]), q)
    row = json.loads(run(capsys, "bound", str(q), "--constant", "r", *FAST)[1])["rows"][0]
    assert (row["lower"], row["upper"]) == pytest.approx((2.0, 2.0))


def test_bound_parse_error(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"name": "x",\n  "members": [1, }')
    code, _, err = run(capsys, "bound", str(p), "r", *FAST)
    assert code == 2 and "line 2" in err and "column" in err


def test_bound_contract_error(tmp_path, capsys):
    p = tmp_path / "l2.json"
    save_family(make_family(np.eye(2), domain_p=2.0), p)
    assert run(capsys, "bound", str(p), "pi2", *FAST)[0] == 3


def test_bound_missing_constant(tmp_path, capsys):
    p = tmp_path / "id.json"
    save_family(make_family(np.eye(2)), p)
    assert run(capsys, "bound", str(p), *FAST)[0] == 2


def test_csv(capsys, tmp_path):
    out = tmp_path / "r.csv"
    code = main(["verify", "diag-exact", "--format", "csv", "--out", str(out), *FAST])
    text = out.read_bytes().decode()
    assert code == 0 and text.endswith("\r\n")
    rows = list(csv.reader(io.StringIO(text)))
    assert tuple(rows[0]) == CSV_COLUMNS and rows[1][4] == "true"


def test_failing_row_exits_1(monkeypatch, capsys):
    from randbound import suites

    def broken(opts):
        out = suites._Rows(opts)
        out.add("x", "test", "le", lambda: {"lower": 2.0, "upper": 1.0})
        return out.rows

    monkeypatch.setitem(suites.SUITES, "komatsu", broken)
    assert run(capsys, "verify", "komatsu", *FAST)[0] == 1


@pytest.mark.parametrize("suite", ["diag-exact", "product", "expsup"])
def test_byte_identical(capsys, suite):
    a = run(capsys, "verify", suite, "--n", "1,2,4", *FAST)[1] if suite == "expsup" else \
        run(capsys, "verify", suite, *FAST)[1]
    b = run(capsys, "verify", suite, "--n", "1,2,4", *FAST)[1] if suite == "expsup" else \
        run(capsys, "verify", suite, *FAST)[1]
    assert a == b


def test_pass_flags_recomputable(capsys):
    for suite in ("comparison-constants", "duality", "identities"):
        rep = json.loads(run(capsys, "verify", suite, "--cases", "3", *FAST)[1])
        for row in rep["rows"]:
            assert row["invariant"]
            assert row_passes(row) == row["pass"]
