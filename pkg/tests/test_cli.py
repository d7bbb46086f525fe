import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from opbmo.cli import run
from opbmo.dyadic import MatrixSymbol, adjoint
from opbmo.serialize import dumps, report_from_json, symbol_from_json, symbol_to_json
from opbmo.witness import GROWTH_COLUMNS


def call(tmp_path, name, *args):
    out = tmp_path / name
    code = run([*args, "--out", str(out)])
    return code, out


@pytest.fixture
def rank_one(tmp_path):
    code, path = call(tmp_path, "fam.json", "family", "--kind", "rank_one_rademacher", "--N", "4")
    assert code == 0
    return path


def test_family_then_norms(tmp_path, rank_one):
    obj = json.loads(rank_one.read_text())
    assert obj["family"]["kind"] == "rank_one_rademacher"
    B = symbol_from_json(obj)
    assert (B.n, B.depth) == (5, 5)
    code, out = call(tmp_path, "rep.json", "norms", "--in", str(rank_one), "--norm", "sbmo,wbmo")
    assert code == 0
    rep = report_from_json(json.loads(out.read_text()))
    assert rep["sbmo"] == pytest.approx(1.0, abs=1e-8)
    assert rep["adj:sbmo"] == pytest.approx(2.0, abs=1e-8)
    assert rep["adj:wbmo"] == pytest.approx(1.0, abs=1e-3)


def test_norms_csv(tmp_path, rng):
    src = tmp_path / "b.json"
    src.write_text(dumps(symbol_to_json(MatrixSymbol.random(rng, 2, 3))))
    code, out = call(tmp_path, "n.csv", "norms", "--in", str(src), "--format", "csv", "--no-adjoint")
    assert code == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 1 and set(rows[0]) == {"bmo_norm", "sbmo", "wbmo", "carl", "para", "spara", "so", "mult"}


def test_verify_byte_identical(tmp_path):
    args = ["verify", "--seed", "0", "--samples", "15"]
    c1, a = call(tmp_path, "a.json", *args)
    c2, b = call(tmp_path, "b.json", *args, "--workers", "3")
    assert c1 == c2 == 0
    assert a.read_bytes() == b.read_bytes()
    assert json.loads(a.read_text())["passed"] is True


def test_verify_failure_exit(tmp_path):
    code, _ = call(tmp_path, "v.json", "verify", "--samples", "3", "--tol", "0")
    assert code == 1


def test_search_seeded(tmp_path, rank_one):
    B = symbol_from_json(json.loads(rank_one.read_text()))
    adj = tmp_path / "adj.json"
    adj.write_text(dumps(symbol_to_json(adjoint(B))))
    code, out = call(tmp_path, "s.json", "search", "--numerator", "sbmo", "--denominator", "wbmo",
                     "--in", str(adj), "--restarts", "1", "--steps", "3")
    assert code == 0
    obj = json.loads(out.read_text())
    assert obj["ratio"] >= 0.95 * 2
    assert symbol_from_json(obj["symbol"]).n == 5


def test_growth_csv(tmp_path):
    code, out = call(tmp_path, "g.csv", "growth", "--numerator", "adj:sbmo", "--denominator", "adj:wbmo",
                     "--kind", "rank_one_rademacher", "--dim", "2,5")
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0].split(",") == list(GROWTH_COLUMNS)
    rows = list(csv.DictReader(lines))
    np.testing.assert_allclose([float(r["ratio"]) for r in rows], [1.0, 2.0], rtol=1e-8)


def test_diagonal_scalar_family(tmp_path, rng):
    src = tmp_path / "s.json"
    src.write_text(json.dumps({"symbols": [symbol_to_json(MatrixSymbol.random(rng, 1, 3)) for _ in range(2)]}))
    code, out = call(tmp_path, "d.json", "family", "--kind", "diagonal_scalar", "--in", str(src))
    assert code == 0
    assert symbol_from_json(json.loads(out.read_text())).n == 2


@pytest.mark.parametrize("args", [
    ["bogus"],
    ["norms"],
    ["norms", "--in", "missing.json"],
    ["family", "--kind", "rank_one_rademacher"],
    ["family", "--kind", "rank_one_rademacher", "--N", "4", "--depth", "4"],
    ["search", "--numerator", "sbmo"],
    ["growth", "--numerator", "sbmo", "--denominator", "wbmo", "--dim", "a,b"],
    ["verify", "--samples", "0"],
])
def test_usage_errors(tmp_path, monkeypatch, args):
    monkeypatch.chdir(tmp_path)
    assert run(args) == 2


def test_bad_norm_name(tmp_path, rank_one):
    assert run(["norms", "--in", str(rank_one), "--norm", "nope"]) == 2


def test_degenerate_search_exit(tmp_path):
    src = tmp_path / "c.json"
    src.write_text(dumps(symbol_to_json(MatrixSymbol.constant(np.eye(2), 2))))
    assert run(["search", "--numerator", "sbmo", "--denominator", "wbmo", "--in", str(src),
                "--restarts", "1", "--steps", "2"]) == 1


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "opbmo", "family", "--kind", "carleson_diagonal", "--depth", "2"],
                         capture_output=True, text=True, check=True)
    obj = json.loads(res.stdout)
    assert obj["n"] == 3 and math.isclose(obj["family"]["expected"]["carl"], math.sqrt(2))
