import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import all_haar
from opbmo.dyadic import (
    DyadicIndex,
    MatrixSymbol,
    VectorField,
    expectation,
    expectation_field,
)
from opbmo.hardy import (
    TraceField,
    circledast,
    circledast_expanded,
    dual_pointwise_rhs,
    martingale_maximal,
    maximal,
    pairing,
    square_function,
)
from opbmo.operators import apply_matrix_free

seeds = st.integers(0, 2 ** 32 - 1)


def direct_circledast(f, g):
    K = f.depth
    out = np.zeros((2 ** K, f.n, f.n), dtype=complex)
    for level, pos, h in all_haar(K):
        I = DyadicIndex(level, pos)
        s = I.cells(K)
        fI = (h[:, None] * f.values).mean(axis=0)
        gI = (h[:, None] * g.values).mean(axis=0)
        mf, mg = f.values[s].mean(axis=0), g.values[s].mean(axis=0)
        out += h[:, None, None] * (np.outer(fI, mg.conj()) + np.outer(mf, gI.conj()))[None]
    return out


def direct_maximal(prof):
    K = int(np.log2(prof.size))
    out = np.zeros_like(prof)
    for t in range(prof.size):
        out[t] = max(prof[(t >> (K - l)) << (K - l):((t >> (K - l)) + 1) << (K - l)].mean() for l in range(K + 1))
    return out


def fields(seed, n, K, zero_mean=False):
    rng = np.random.default_rng(seed)
    return rng, VectorField.random(rng, n, K, zero_mean=zero_mean), VectorField.random(rng, n, K)


class TestCircledast:
    def test_top_haar_times_constant(self, rng):
        e, d = rng.standard_normal(2), rng.standard_normal(2)
        T = DyadicIndex(0, 0)
        f = VectorField.basis(2, 3, T, 0) * e[0] + VectorField.basis(2, 3, T, 1) * e[1]
        g = VectorField(np.tile(d, (8, 1)))
        h = T.haar_values(3)
        np.testing.assert_allclose(circledast(f, g).cells, h[:, None, None] * np.outer(e, d)[None], atol=1e-14)

    def test_zero(self, rng):
        f = VectorField.random(rng, 2, 3)
        z = VectorField(np.zeros((8, 2)))
        np.testing.assert_array_equal(circledast(f, z).cells, 0)
        np.testing.assert_array_equal(circledast(z, f).cells, 0)

    @given(seeds, st.integers(1, 3), st.integers(1, 5))
    def test_definition_and_expansion(self, seed, n, K):
        _, f, g = fields(seed, n, K)
        out = circledast(f, g).cells
        np.testing.assert_allclose(out, direct_circledast(f, g), atol=1e-12)
        np.testing.assert_allclose(out, circledast_expanded(f, g).cells, atol=1e-11)

    @given(seeds, st.integers(1, 3), st.integers(1, 4))
    def test_bilinear(self, seed, n, K):
        rng, f, g = fields(seed, n, K)
        f2, g2 = VectorField.random(rng, n, K), VectorField.random(rng, n, K)
        a = complex(rng.standard_normal(), rng.standard_normal())
        np.testing.assert_allclose(circledast(f + f2 * a, g).cells,
                                   circledast(f, g).cells + a * circledast(f2, g).cells, atol=1e-11)
        np.testing.assert_allclose(circledast(f, g + g2 * a).cells,
                                   circledast(f, g).cells + np.conj(a) * circledast(f, g2).cells, atol=1e-11)

    @given(seeds, st.integers(1, 3), st.integers(1, 5))
    def test_expectation_multiplicative(self, seed, n, K):
        _, f, g = fields(seed, n, K)
        fg = MatrixSymbol.from_cells(circledast(f, g).cells)
        for k in range(K + 1):
            rhs = circledast(expectation_field(f, k), expectation_field(g, k)).cells
            np.testing.assert_allclose(expectation(fg, k).cells, rhs, atol=1e-11)


class TestPairing:
    def test_single_term(self, rng):
        A = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        e, d = rng.standard_normal(2), rng.standard_normal(2) + 1j * rng.standard_normal(2)
        T = DyadicIndex(0, 0)
        B = MatrixSymbol.from_coeffs(2, 2, coeffs={T: A})
        h = T.haar_values(2)
        F = TraceField(h[:, None, None] * np.outer(e, d.conj())[None])
        assert pairing(B, F) == pytest.approx(np.vdot(d, A @ e), abs=1e-14)

    def test_zero(self, rng):
        assert pairing(MatrixSymbol.random(rng, 2, 2), TraceField(np.zeros((4, 2, 2)))) == 0

    @given(seeds, st.integers(1, 4), st.integers(1, 4))
    def test_duality(self, seed, n, K):
        rng, f, g = fields(seed, n, K, zero_mean=True)
        B = MatrixSymbol.random(rng, n, K)
        lhs = pairing(B, circledast(f, g))
        rhs = apply_matrix_free("mult", B, f).inner(g)
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(rhs))

    def test_linear_and_bounded(self, rng):
        B = MatrixSymbol.random(rng, 2, 3)
        F1 = TraceField(rng.standard_normal((8, 2, 2)) + 1j * rng.standard_normal((8, 2, 2)))
        F2 = TraceField(rng.standard_normal((8, 2, 2)))
        c = 0.3 - 1.2j
        assert pairing(B, F1 + F2 * c) == pytest.approx(pairing(B, F1) + c * pairing(B, F2), abs=1e-12)
        sup = np.linalg.norm(B.cells, 2, axis=(1, 2)).max()
        assert abs(pairing(B, F1)) <= sup * F1.trace_norms().mean() * (1 + 1e-12)

    def test_mismatch(self, rng):
        with pytest.raises(ValueError):
            pairing(MatrixSymbol.random(rng, 2, 3), TraceField(np.zeros((4, 2, 2))))


class TestMaximal:
    def test_constant(self):
        A = np.array([[1.0, 2.0], [0.0, -1.0]])
        out = maximal(TraceField(np.repeat(A[None], 8, axis=0)))
        np.testing.assert_allclose(out, np.linalg.svd(A, compute_uv=False).sum())

    def test_haar(self):
        np.testing.assert_allclose(maximal(DyadicIndex(0, 0).haar_values(4)), 1.0)

    def test_oracle(self, rng):
        prof = rng.random(32)
        np.testing.assert_allclose(maximal(prof), direct_maximal(prof))

    def test_monotone(self, rng):
        a = rng.random(16)
        b = a + rng.random(16)
        assert np.all(maximal(a) <= maximal(b))

    def test_martingale_below_hardy_littlewood(self, rng):
        F = TraceField(rng.standard_normal((16, 2, 2)))
        assert np.all(martingale_maximal(F) <= maximal(F) + 1e-12)

    @given(seeds, st.integers(1, 3), st.integers(1, 5))
    def test_dual_pointwise(self, seed, n, K):
        _, f, g = fields(seed, n, K)
        lhs = martingale_maximal(circledast(f, g))
        assert np.all(lhs <= dual_pointwise_rhs(f, g) * (1 + 1e-9))

    @given(seeds, st.integers(1, 3), st.integers(1, 5))
    def test_dual_l1(self, seed, n, K):
        _, f, g = fields(seed, n, K)
        lhs = martingale_maximal(circledast(f, g)).mean()
        l2 = lambda x: np.sqrt(np.mean(x ** 2))  # noqa: E731
        assert lhs <= (l2(maximal(f)) * l2(maximal(g)) + f.l2_norm() * g.l2_norm()) * (1 + 1e-9)

    def test_hardy_littlewood_version_can_fail(self):
        # the ancestor-average maximal function of the trace norm breaks the pointwise bound
        f = VectorField.basis(1, 3, DyadicIndex(2, 2), 0)
        g = VectorField.basis(1, 3, DyadicIndex(1, 1), 0)
        fg = circledast(f, g)
        rhs = dual_pointwise_rhs(f, g)
        np.testing.assert_allclose(maximal(fg)[:4], 2 * rhs[:4])
        assert np.all(martingale_maximal(fg) <= rhs)


class TestSquareFunction:
    def test_haar(self):
        phi = MatrixSymbol.from_coeffs(1, 3, coeffs={DyadicIndex(0, 0): np.eye(1)})
        s, l1 = square_function(phi)
        np.testing.assert_allclose(s, 1.0)
        assert l1 == pytest.approx(1.0)

    def test_constant(self):
        s, l1 = square_function(MatrixSymbol.constant([[2.0]], 3))
        np.testing.assert_array_equal(s, 0)
        assert l1 == 0

    def test_needs_scalar(self, rng):
        with pytest.raises(ValueError):
            square_function(MatrixSymbol.random(rng, 2, 2))
