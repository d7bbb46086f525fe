"""Paraproducts, Haar multipliers and the block-diagonal operator ``D_{U*,V}``.

Operators act on ``C^n``-valued functions of depth ``K``.  Assembled matrices
use orthonormal Haar coordinates: row block 0 is the mean (``1 ⊗ e_j``) and
row block ``2**l + p`` is ``h_I ⊗ e_j``, flattened as ``heap * n + j``.  The
zero-mean subspace drops the first ``n`` coordinates.

The kernels below take cell arrays of shape ``(2**K, n, m)`` (``m`` columns at
once), so matrix-free application and column-wise assembly share one code
path per operator.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dyadic import (
    MatrixSymbol,
    VectorField,
    adjoint,
    haar_analysis,
    haar_synthesis,
    interval_means,
    level_slice,
    measures,
    subtree_sums,
)
from .linalg import DENSE_LIMIT, ConvergenceError, op_norm, power_norm

KINDS = ("para", "delta", "mult", "diag")
FULL, ZERO_MEAN = "full", "zero_mean"


# -- kernels on (cells, n, m) arrays -------------------------------------------

def _para(B: MatrixSymbol, F):
    K = B.depth
    means = interval_means(F)[: 2 ** K]
    out = np.zeros(F.shape, dtype=complex)
    out[1:] = B.haar[1:] @ means[1:]
    return haar_synthesis(out)


def _delta(B: MatrixSymbol, F):
    K = B.depth
    Fh = haar_analysis(F)
    terms = (B.haar[1:] @ Fh[1:]) / measures(K)[1: 2 ** K, None, None]
    out = np.zeros(F.shape, dtype=complex)
    for level in range(K):
        t = terms[2 ** level - 1: 2 ** (level + 1) - 1]
        out += np.repeat(t, 2 ** (K - level), axis=0)
    return out


def _mult(B: MatrixSymbol, F):
    # Lambda_B f (t) = sum_{I ∋ t} (B(t) - m_I B) f_I h_I(t); the mean of f is ignored.
    K = B.depth
    Fh = haar_analysis(F)
    mB = interval_means(B.cells)
    cells = np.asarray(B.cells)
    out = np.zeros(F.shape, dtype=complex)
    for level in range(K):
        w = 2 ** (K - level)
        sign = np.tile(np.r_[np.ones(w // 2), -np.ones(w // 2)], 2 ** level) * 2.0 ** (level / 2)
        P = cells - np.repeat(mB[level_slice(level)], w, axis=0)
        fI = np.repeat(Fh[level_slice(level)], w, axis=0) * sign[:, None, None]
        out += P @ fI
    return out


def diag_blocks(U: MatrixSymbol, V: MatrixSymbol) -> np.ndarray:
    """Heap array of ``(1/|I|) sum_{J ⊊ I} U_J* V_J`` (strict inclusion)."""
    _match(U, V)
    K = U.depth
    own = np.conj(np.swapaxes(U.haar, 1, 2)) @ V.haar
    own[0] = 0
    strict = subtree_sums(own, K) - own
    strict[0] = 0
    return strict / measures(K)[: 2 ** K, None, None]


def _diag(U: MatrixSymbol, V: MatrixSymbol, F):
    G = diag_blocks(U, V)
    Fh = haar_analysis(F)
    out = np.zeros(F.shape, dtype=complex)
    out[1:] = G[1:] @ Fh[1:]
    return haar_synthesis(out)


def _kernel(kind, B, V, F):
    if kind == "para":
        return _para(B, F)
    if kind == "delta":
        return _delta(B, F)
    if kind == "mult":
        return _mult(B, F)
    if kind == "diag":
        if V is None:
            raise ValueError("diag needs a second symbol V")
        return _diag(B, V, F)
    raise ValueError(f"unknown operator kind {kind!r}; expected one of {KINDS}")


def _match(a, b):
    if (a.n, a.depth) != (b.n, b.depth):
        raise ValueError(f"dimension/depth mismatch: (n={a.n}, K={a.depth}) vs (n={b.n}, K={b.depth})")


def apply_matrix_free(kind: str, B: MatrixSymbol, f: VectorField, V: MatrixSymbol | None = None) -> VectorField:
    """Apply ``para``, ``delta``, ``mult`` (``Lambda_B``) or ``diag`` (``D_{B*,V}``) to ``f``.

    ``mult`` and ``diag`` act on the zero-mean subspace; the mean of ``f`` is ignored.
    """
    _match(B, f)
    out = _kernel(kind, B, V, np.asarray(f.values)[:, :, None])
    return VectorField(out[:, :, 0])


def mult_on_basis(B: MatrixSymbol, heap: int) -> np.ndarray:
    """Cells of ``Lambda_B(h_I e_j)`` for ``j = 0..n-1`` as an ``(2**K, n, n)`` array.

    Column ``j`` of each cell matrix is the value for ``e_j``; this is
    ``(P_I B)(t) h_I(t)`` supported on ``I``.
    """
    K, n = B.depth, B.n
    H = np.zeros((2 ** K, n, n), dtype=complex)
    H[heap] = np.eye(n)
    return _mult(B, haar_synthesis(H))


# -- assembled operators ------------------------------------------------------------

def _dim(n, K, space):
    return n * 2 ** K if space == FULL else n * (2 ** K - 1)


@dataclass(frozen=True, eq=False)
class AssembledOperator:
    """Dense matrix of a finite operator in Haar coordinates.

    ``matrix`` has shape ``(dim(codomain), dim(domain))``; ``full()`` embeds it
    into the full ``n 2**K`` square space with zeros.
    """

    matrix: np.ndarray
    n: int
    depth: int
    domain: str = FULL
    codomain: str = FULL
    label: str = "composite"

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        want = (_dim(self.n, self.depth, self.codomain), _dim(self.n, self.depth, self.domain))
        if m.shape != want:
            raise ValueError(f"matrix shape {m.shape} does not match {want}")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    def full(self) -> np.ndarray:
        d = _dim(self.n, self.depth, FULL)
        out = np.zeros((d, d), dtype=complex)
        r0 = 0 if self.codomain == FULL else self.n
        c0 = 0 if self.domain == FULL else self.n
        out[r0:, c0:] = self.matrix
        return out

    def restrict_domain(self, domain: str = ZERO_MEAN) -> "AssembledOperator":
        if domain == self.domain:
            return self
        if domain != ZERO_MEAN:
            raise ValueError("can only restrict a full domain to the zero-mean subspace")
        return AssembledOperator(self.matrix[:, self.n:], self.n, self.depth, ZERO_MEAN, self.codomain, self.label)

    def adjoint(self) -> "AssembledOperator":
        return AssembledOperator(self.matrix.conj().T, self.n, self.depth, self.codomain, self.domain, self.label)

    def __matmul__(self, other: "AssembledOperator") -> "AssembledOperator":
        return AssembledOperator(self.full() @ other.full(), self.n, self.depth, label="composite")

    def __add__(self, other: "AssembledOperator") -> "AssembledOperator":
        if (self.domain, self.codomain) == (other.domain, other.codomain):
            m = self.matrix + other.matrix
            return AssembledOperator(m, self.n, self.depth, self.domain, self.codomain, "composite")
        return AssembledOperator(self.full() + other.full(), self.n, self.depth, label="composite")

    def apply(self, f: VectorField) -> VectorField:
        x = np.asarray(f.haar).reshape(-1)
        if self.domain == ZERO_MEAN:
            x = x[self.n:]
        y = self.matrix @ x
        if self.codomain == ZERO_MEAN:
            y = np.r_[np.zeros(self.n, dtype=complex), y]
        return VectorField.from_haar(y.reshape(2 ** self.depth, self.n))

    def norm(self) -> float:
        return op_norm(self.matrix)


def _assemble(kind, B, V, domain, codomain, workers=1, chunk=512):
    n, K = B.n, B.depth
    d = n * 2 ** K
    if d > DENSE_LIMIT:
        raise ValueError(f"n * 2**K = {d} exceeds the dense limit {DENSE_LIMIT}; use matrix-free norms")
    c0 = 0 if domain == FULL else n
    cols = list(range(c0, d))
    blocks = [cols[i:i + chunk] for i in range(0, len(cols), chunk)]

    def run(block):
        E = np.zeros((d, len(block)), dtype=complex)
        E[block, np.arange(len(block))] = 1
        F = haar_synthesis(E.reshape(2 ** K, n, len(block)))
        return haar_analysis(_kernel(kind, B, V, F)).reshape(d, len(block))

    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(run, blocks))
    else:
        parts = [run(b) for b in blocks]
    M = np.concatenate(parts, axis=1) if parts else np.zeros((d, 0), dtype=complex)
    if codomain == ZERO_MEAN:
        M = M[n:]
    return AssembledOperator(M, n, K, domain, codomain, kind)


def assemble_para(B: MatrixSymbol, workers: int = 1) -> AssembledOperator:
    """``pi_B f = sum_I B_I (m_I f) h_I`` on the full space."""
    return _assemble("para", B, None, FULL, FULL, workers)


def assemble_delta(B: MatrixSymbol, workers: int = 1) -> AssembledOperator:
    """``Delta_B f = sum_I B_I f_I chi_I / |I|`` on the full space."""
    return _assemble("delta", B, None, FULL, FULL, workers)


class AssemblyMismatch(AssertionError):
    pass


MULT_TOL = 1e-11


def assemble_mult(B: MatrixSymbol, workers: int = 1, check: bool = True) -> AssembledOperator:
    """``Lambda_B`` from zero-mean fields into the full space.

    Built column-by-column from the multiplier definition; with ``check`` it is
    also built as ``pi_B + Delta_B`` restricted to zero-mean fields and the
    two must agree.
    """
    L = _assemble("mult", B, None, ZERO_MEAN, FULL, workers)
    if check:
        alt = (assemble_para(B, workers) + assemble_delta(B, workers)).restrict_domain()
        err = np.abs(L.matrix - alt.matrix).max(initial=0.0)
        scale = max(1.0, np.abs(alt.matrix).max(initial=0.0))
        if err > MULT_TOL * scale:
            raise AssemblyMismatch(f"Lambda_B builds disagree by {err:.3g}")
    return L


def assemble_diag(U: MatrixSymbol, V: MatrixSymbol, workers: int = 1) -> AssembledOperator:
    """``D_{U*,V} h_I e = h_I (1/|I|) sum_{J ⊊ I} U_J* V_J e`` on zero-mean fields."""
    _match(U, V)
    return _assemble("diag", U, V, ZERO_MEAN, ZERO_MEAN, workers)


def diag_norm(U: MatrixSymbol, V: MatrixSymbol) -> float:
    """``||D_{U*,V}||`` as the largest block norm."""
    G = diag_blocks(U, V)[1:]
    if G.size == 0:
        return 0.0
    return float(np.linalg.norm(G, ord=2, axis=(1, 2)).max())


# -- matrix-free norms -----------------------------------------------------------------

def _coords_map(n, K, domain, codomain, fn):
    d = n * 2 ** K
    c0 = 0 if domain == FULL else n
    r0 = 0 if codomain == FULL else n

    def apply(x):
        h = np.zeros(d, dtype=complex)
        h[c0:] = x
        F = haar_synthesis(h.reshape(2 ** K, n, 1))
        return haar_analysis(fn(F)).reshape(-1)[r0:]

    return apply


def matrix_free_norm(kind: str, B: MatrixSymbol, V: MatrixSymbol | None = None, domain: str | None = None,
                     strict: bool = True):
    """Operator norm by power iteration without assembling.

    Returns ``(value, residual)``.  ``kind`` as in :func:`apply_matrix_free`,
    plus ``"papa"`` for ``pi_B* pi_V``.
    """
    n, K = B.n, B.depth
    Bs = adjoint(B)
    if kind == "para":
        fwd, adj, dom, cod = (lambda F: _para(B, F)), (lambda F: _delta(Bs, F)), FULL, FULL
    elif kind == "delta":
        fwd, adj, dom, cod = (lambda F: _delta(B, F)), (lambda F: _para(Bs, F)), FULL, FULL
    elif kind == "mult":
        fwd = lambda F: _mult(B, F)  # noqa: E731
        adj = lambda F: _para(Bs, F) + _delta(Bs, F)  # noqa: E731
        dom, cod = ZERO_MEAN, FULL
    elif kind == "diag":
        fwd, adj, dom, cod = (lambda F: _diag(B, V, F)), (lambda F: _diag(V, B, F)), ZERO_MEAN, ZERO_MEAN
    elif kind == "papa":
        Vs = adjoint(V)
        fwd = lambda F: _delta(Bs, _para(V, F))  # noqa: E731
        adj = lambda F: _delta(Vs, _para(B, F))  # noqa: E731
        dom, cod = FULL, FULL
    else:
        raise ValueError(f"unknown operator kind {kind!r}")
    if domain is not None:
        dom = domain
    r0 = 0 if dom == FULL else n
    A = _coords_map(n, K, dom, cod, fwd)
    # the adjoint lands in the full space; project back onto the domain coordinates
    Ah_full = _coords_map(n, K, cod, FULL, adj)
    res = power_norm(A, lambda y: Ah_full(y)[r0:], _dim(n, K, dom))
    if strict and not res.converged:
        raise ConvergenceError(f"{kind} norm did not converge", res.value, res.residual)
    return res.value, res.residual
