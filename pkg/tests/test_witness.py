import math

import numpy as np
import pytest

from opbmo.dyadic import MatrixSymbol, adjoint
from opbmo.norms import bmo_carl, bmo_norm, para_norm, sbmo, wbmo
from opbmo.witness import (
    GROWTH_COLUMNS,
    DegenerateSearch,
    FamilySpec,
    SearchConfig,
    carleson_diagonal,
    diagonal_scalar,
    eval_norm_expr,
    family,
    growth_curve,
    parse_norm_expr,
    rank_one_rademacher,
    ratio_search,
)


class TestFamilies:
    @pytest.mark.parametrize("N", [1, 2, 4, 6])
    def test_rank_one(self, N):
        fam = rank_one_rademacher(N)
        B = fam.symbol
        assert (B.n, B.depth) == (N + 1, N + 1)
        assert sbmo(B) == pytest.approx(1.0, rel=1e-8)
        assert sbmo(adjoint(B)) == pytest.approx(math.sqrt(N), rel=1e-8)
        assert wbmo(adjoint(B)) == pytest.approx(1.0, abs=1e-8)
        assert wbmo(B) == pytest.approx(1.0, abs=1e-8)
        assert bmo_carl(B) == pytest.approx(fam.expected["carl"], rel=1e-8)

    def test_rank_one_feasibility(self):
        with pytest.raises(ValueError):
            rank_one_rademacher(4, depth=4)
        with pytest.raises(ValueError):
            rank_one_rademacher(4, n=4)
        with pytest.raises(ValueError):
            family(FamilySpec("rank_one_rademacher"))

    def test_carleson_diagonal(self):
        fam = carleson_diagonal(4)
        B = fam.symbol
        assert B.n == 15
        assert bmo_carl(B) == pytest.approx(2.0, abs=1e-8)
        np.testing.assert_allclose(np.linalg.norm(B.cells, 2, axis=(1, 2)), 1.0)
        vals = np.diagonal(B.cells, axis1=1, axis2=2)
        assert set(np.unique(np.round(vals.real, 12))) <= {-1.0, 0.0, 1.0}
        for name in ("sbmo", "adj:sbmo"):
            assert eval_norm_expr(name, B) == pytest.approx(fam.expected[name], rel=1e-8)

    def test_carleson_dimension(self):
        with pytest.raises(ValueError):
            family(FamilySpec("carleson_diagonal", depth=3, n=8))

    def test_diagonal_scalar(self, rng):
        b = MatrixSymbol.random(rng, 1, 4)
        B = diagonal_scalar([b, b, b]).symbol
        assert bmo_norm(B) == pytest.approx(bmo_norm(b), rel=1e-12)
        c = MatrixSymbol.random(rng, 1, 4)
        D = family(FamilySpec("diagonal_scalar", scalars=(b, c), n=3)).symbol
        assert D.n == 3
        np.testing.assert_allclose(D.cells[:, 1, 1], c.cells[:, 0, 0])
        with pytest.raises(ValueError):
            diagonal_scalar([b, MatrixSymbol.random(rng, 1, 3)])

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            family(FamilySpec("nope"))


class TestExpressions:
    def test_parse(self):
        assert parse_norm_expr("adj:sbmo") == ("adj", "sbmo", 1)
        assert parse_norm_expr("sweep:sbmo") == ("sweep", "sbmo", 1)
        assert parse_norm_expr("sbmo^2") == ("", "sbmo", 2)
        with pytest.raises(ValueError):
            parse_norm_expr("adj:nope")

    def test_sweep_ratio_scalar(self, rng):
        phi = MatrixSymbol.random(rng, 1, 4)
        r = eval_norm_expr("sweep:sbmo", phi) / eval_norm_expr("sbmo^2", phi)
        assert np.isfinite(r) and r > 0


class TestSearch:
    def test_rank_one_seed(self):
        B = adjoint(rank_one_rademacher(4).symbol)
        cfg = SearchConfig("sbmo", "wbmo", B.n, B.depth, restarts=2, steps=15, seed=0)
        res = ratio_search(cfg, seed_symbol=B)
        assert res.ratio >= 0.95 * 2.0
        assert res.trace[0] == pytest.approx(2.0, abs=1e-6)

    def test_carleson_seed(self):
        B = carleson_diagonal(3).symbol
        start = bmo_carl(B) / (para_norm(B)[0] + para_norm(adjoint(B))[0])
        cfg = SearchConfig("carl", "spara", B.n, B.depth, restarts=1, steps=10, seed=1)
        res = ratio_search(cfg, seed_symbol=B)
        assert res.ratio >= start * (1 - 1e-12)

    def test_same_norm_ratio_is_one(self):
        res = ratio_search(SearchConfig("bmo_norm", "bmo_norm", 2, 3, restarts=2, steps=10))
        np.testing.assert_allclose(res.trace, 1.0, rtol=1e-12)

    def test_trace_monotone_and_deterministic(self):
        cfg = SearchConfig("mult", "sbmo", 2, 3, restarts=3, steps=20, seed=5)
        a = ratio_search(cfg)
        b = ratio_search(cfg, workers=3)
        assert np.all(np.diff(a.trace) >= 0)
        assert a.ratio == b.ratio and a.trace == b.trace
        np.testing.assert_array_equal(a.symbol.haar, b.symbol.haar)
        assert a.ratio == max(a.restart_best)

    def test_degenerate(self):
        zero = MatrixSymbol.constant(np.eye(2), 2)
        cfg = SearchConfig("sbmo", "sbmo", 2, 2, restarts=1, steps=3)
        with pytest.raises(DegenerateSearch):
            ratio_search(cfg, seed_symbol=zero)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SearchConfig("bogus", "sbmo", 2, 2)
        with pytest.raises(ValueError):
            SearchConfig("sbmo", "sbmo", 0, 2)
        with pytest.raises(ValueError):
            ratio_search(SearchConfig("sbmo", "wbmo", 2, 2), seed_symbol=MatrixSymbol.constant(np.eye(3), 2))


class TestGrowth:
    def test_rank_one_column(self):
        rows = growth_curve("adj:sbmo", "adj:wbmo", [2, 5, 10], 3, mode="rank_one_rademacher")
        for row in rows:
            assert row["ratio"] == pytest.approx(math.sqrt(row["n"] - 1), rel=1e-8)
            assert set(row) == set(GROWTH_COLUMNS)

    def test_search_reproducible(self):
        kw = dict(restarts=2, steps=5, seed=3)
        a = growth_curve("sweep:sbmo", "sbmo^2", [1, 2], 3, **kw)
        b = growth_curve("sweep:sbmo", "sbmo^2", [1, 2], 3, workers=2, **kw)
        assert a == b
        assert np.isfinite(a[0]["ratio"])

    def test_fit(self):
        rows = growth_curve("adj:sbmo", "adj:wbmo", [3, 7], 3, mode="carleson_diagonal")
        x = np.log(np.array([4.0, 8.0]))
        r = np.array([row["ratio"] for row in rows])
        assert rows[0]["fit_log"] == pytest.approx(r @ x / (x @ x))
        assert rows[0]["residual"] == pytest.approx(r[0] - rows[0]["fit_log"] * x[0])

    def test_errors(self):
        with pytest.raises(ValueError):
            growth_curve("sbmo", "wbmo", [], 3)
        with pytest.raises(ValueError):
            growth_curve("sbmo", "wbmo", [4], 3, mode="carleson_diagonal")
