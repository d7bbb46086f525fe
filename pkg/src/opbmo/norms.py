"""Operator-valued dyadic BMO norms.

Every supremum over dyadic intervals runs over levels ``0 .. K-1``; intervals
at level ``>= K`` see a constant function and contribute zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dyadic import (
    DyadicIndex,
    MatrixSymbol,
    VectorField,
    adjoint,
    haar_synthesis,
    interval_means,
    level_slice,
    measures,
    subtree_sums,
)
from .linalg import DENSE_LIMIT
from .operators import (
    FULL,
    ZERO_MEAN,
    assemble_mult,
    assemble_para,
    matrix_free_norm,
)

NORM_NAMES = ("bmo_norm", "sbmo", "wbmo", "carl", "para", "spara", "so", "mult")
SBMO_RTOL = 1e-8
WBMO_RESTARTS = 32
WBMO_TOL = 1e-10
WBMO_FLAG = 1e-6


class CrossCheckError(AssertionError):
    """Equivalent formulas for the same norm disagree."""


@dataclass
class NormReport:
    """Norm values plus per-norm diagnostics (attaining interval, vectors, residual)."""

    values: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.values[name]

    def add(self, name, value, **diag):
        self.values[name] = float(value)
        if diag:
            self.diagnostics[name] = diag


def _argmax_interval(per_heap):
    i = int(np.argmax(per_heap[1:])) + 1
    return i, DyadicIndex.from_heap(i)


def _opnorms(A):
    """Spectral norms of a stack of matrices."""
    if A.shape[0] == 0:
        return np.zeros(0)
    return np.linalg.norm(A, ord=2, axis=(-2, -1))


def _level_diffs(B: MatrixSymbol, level: int):
    K = B.depth
    mB = interval_means(B.cells)[level_slice(level)]
    return B.cells - np.repeat(mB, 2 ** (K - level), axis=0)


def _block_mean(x, level, depth):
    """Average consecutive blocks of cells belonging to each level-``level`` interval."""
    return x.reshape((2 ** level, 2 ** (depth - level)) + x.shape[1:]).mean(axis=1)


def bmo_norm(B: MatrixSymbol, report: NormReport | None = None) -> float:
    """``sup_I (1/|I| ∫_I ||B(t) - m_I B||^2 dt)^{1/2}`` with operator norms per cell."""
    K = B.depth
    best = np.zeros(2 ** K)
    for level in range(K):
        sq = _opnorms(_level_diffs(B, level)) ** 2
        best[level_slice(level)] = _block_mean(sq, level, K)
    i, I = _argmax_interval(best)
    value = math.sqrt(best[i])
    if report is not None:
        report.add("bmo_norm", value, interval=I)
    return value


def sbmo_grams(B: MatrixSymbol) -> np.ndarray:
    """Heap array of ``(1/|I|) sum_{J ⊆ I} B_J* B_J``."""
    K = B.depth
    own = np.conj(np.swapaxes(B.haar, 1, 2)) @ B.haar
    own[0] = 0
    return subtree_sums(own, K) / measures(K)[: 2 ** K, None, None]


def _sbmo_local(B: MatrixSymbol) -> np.ndarray:
    """Per-interval squared SBMO values ``lambda_max(G_I)``."""
    G = sbmo_grams(B)
    out = np.zeros(G.shape[0])
    out[1:] = np.linalg.eigvalsh(G[1:])[:, -1]
    return np.clip(out, 0.0, None)


def sbmo_formulas(B: MatrixSymbol) -> dict:
    """The five equivalent SBMO expressions, as squared values per formula.

    ``a``: stacked SVD of ``(B(t) - m_I B)`` over the cells of ``I``;
    ``b``: top eigenvalue of the coefficient Gram ``(1/|I|) sum B_J* B_J``;
    ``c``: top eigenvalue of ``(1/|I|) ∫_I (B - m_I B)* (B - m_I B)``;
    ``d``: norm of ``m_I(B* B) - m_I(B*) m_I(B)``;
    ``e``: largest ``||Lambda_B(h_I e)||`` built from ``P_I B`` on ``I``.
    """
    K, n = B.depth, B.n
    cells = np.asarray(B.cells)
    a = np.zeros(2 ** K)
    c = np.zeros(2 ** K)
    for level in range(K):
        D = _level_diffs(B, level)
        w = 2.0 ** (level - K)
        stacked = D.reshape(2 ** level, 2 ** (K - level) * n, n) * math.sqrt(w)
        a[level_slice(level)] = np.linalg.svd(stacked, compute_uv=False)[:, 0] ** 2
        gram = np.conj(np.swapaxes(D, 1, 2)) @ D
        gram = gram.reshape((2 ** level, 2 ** (K - level), n, n)).sum(axis=1) * w
        c[level_slice(level)] = np.linalg.eigvalsh(gram)[:, -1]

    b = _sbmo_local(B)

    mBB = interval_means(np.conj(np.swapaxes(cells, 1, 2)) @ cells)[: 2 ** K]
    mB = interval_means(cells)[: 2 ** K]
    dmat = mBB - np.conj(np.swapaxes(mB, 1, 2)) @ mB
    d = np.zeros(2 ** K)
    d[1:] = _opnorms(dmat[1:])

    e = np.zeros(2 ** K)
    for i in range(1, 2 ** K):
        X = _mult_local(B, DyadicIndex.from_heap(i))
        e[i] = np.linalg.svd(X.reshape(-1, n), compute_uv=False)[0] ** 2 * 2.0 ** -K
    return {"a": a, "b": b, "c": c, "d": d, "e": e}


def _mult_local(B: MatrixSymbol, I: DyadicIndex) -> np.ndarray:
    """Cells of ``Lambda_B(h_I e_j) = (P_I B) e_j h_I`` on ``I``, from ``sum_{J ⊆ I} h_J B_J``."""
    K, n, l = B.depth, B.n, I.level
    sub = np.zeros((2 ** (K - l), n, n), dtype=complex)
    for r in range(K - l):
        w = 2 ** r
        lo = 2 ** (l + r) + I.pos * w
        sub[w:2 * w] = B.haar[lo:lo + w]
    # local synthesis normalizes |J| relative to I
    P = haar_synthesis(sub * 2.0 ** (l / 2))
    return P * I.haar_values(K)[:, None, None]


def sbmo(B: MatrixSymbol, report: NormReport | None = None, check: bool = True,
         rtol: float = SBMO_RTOL) -> float:
    """Strong (column) BMO norm; with ``check`` all five formulas must agree."""
    local = _sbmo_local(B)
    i, I = _argmax_interval(local)
    value = math.sqrt(local[i])
    spread = 0.0
    if check:
        forms = sbmo_formulas(B)
        tops = {k: float(v[1:].max()) for k, v in forms.items()}
        scale = float(np.abs(B.cells).max()) ** 2 * B.n
        spread = max(tops.values()) - min(tops.values())
        if spread > rtol * max(tops.values()) + 64 * np.finfo(float).eps * scale:
            raise CrossCheckError(f"SBMO formulas disagree: {tops}")
    if report is not None:
        G = sbmo_grams(B)[i]
        _, V = np.linalg.eigh(G)
        report.add("sbmo", value, interval=I, e=V[:, -1], residual=spread)
    return value


def _subtree_heaps(I: DyadicIndex, depth: int) -> np.ndarray:
    out = []
    for r in range(depth - I.level):
        w = 2 ** r
        lo = 2 ** (I.level + r) + I.pos * w
        out.extend(range(lo, lo + w))
    return np.array(out, dtype=int)


def _top_vecs(M):
    w, V = np.linalg.eigh(M)
    return np.clip(w[:, -1], 0.0, None), V[:, :, -1]


def _alternate(C, starts, from_e, tol, max_iter):
    """Alternating maximization of ``sum_J |<C_J e, f>|^2`` over unit ``e, f``.

    ``starts`` has shape ``(R, n)``; rows flagged by ``from_e`` start as ``e``,
    the others as ``f``.  Returns per-restart values and final ``(e, f)``.
    """
    Ch = np.conj(np.swapaxes(C, 1, 2))
    R, n = starts.shape
    E = starts.copy()
    Fv = starts.copy()
    val = np.full(R, -1.0)
    done = np.zeros(R, dtype=bool)

    def update_f(E):
        Vs = np.einsum("jab,rb->rja", C, E)
        return _top_vecs(np.einsum("rja,rjb->rab", Vs, Vs.conj()))

    def update_e(Fv):
        Ws = np.einsum("jab,rb->rja", Ch, Fv)
        return _top_vecs(np.einsum("rja,rjb->rab", Ws, Ws.conj()))

    # f-started restarts take a first e-step so both kinds share one loop
    if not from_e.all():
        _, e0 = update_e(Fv)
        E[~from_e] = e0[~from_e]
    for _ in range(max_iter):
        lam_f, Fn = update_f(E)
        lam_e, En = update_e(Fn)
        new = np.maximum(lam_f, lam_e)
        keep = ~done
        E[keep], Fv[keep] = En[keep], Fn[keep]
        conv = np.abs(new - val) <= tol * np.maximum(new, 1e-300)
        val[keep] = new[keep]
        done |= conv
        if done.all():
            break
    return val, E, Fv


def wbmo(B: MatrixSymbol, report: NormReport | None = None, *, restarts: int = WBMO_RESTARTS,
         tol: float = WBMO_TOL, max_iter: int = 1000, seed: int = 0, field: str = "complex") -> float:
    """Weak BMO norm by alternating eigen-iteration; a certified lower bound.

    Half of the restarts start from a random ``e``, the other half from the
    same random vectors used as ``f``, so ``wbmo(B)`` and ``wbmo(B*)`` follow
    mirrored trajectories.  Intervals whose SBMO bound (for ``B`` and ``B*``)
    cannot beat the current best are skipped; this never changes the result.
    ``field="real"`` restricts ``e, f`` to real vectors (real symbols only).
    """
    if field not in ("complex", "real"):
        raise ValueError("field must be 'complex' or 'real'")
    if field == "real" and not B.is_real:
        raise ValueError("field='real' needs a real-valued symbol")
    K, n = B.depth, B.n
    rng = np.random.default_rng(seed)
    half = max(1, restarts // 2)
    X = rng.standard_normal((half, n))
    if field == "complex":
        X = X + 1j * rng.standard_normal((half, n))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    starts = np.concatenate([X, X]).astype(complex if field == "complex" else float)
    from_e = np.r_[np.ones(half, bool), np.zeros(half, bool)]
    H = B.haar if field == "complex" else B.haar.real

    bound = np.minimum(_sbmo_local(B), _sbmo_local(adjoint(B)))
    order = np.argsort(-bound[1:], kind="stable") + 1
    best, best_i, best_diag = 0.0, 1, None
    for i in order:
        if bound[i] <= best and best_diag is not None:
            break
        I = DyadicIndex.from_heap(int(i))
        C = H[_subtree_heaps(I, K)] * math.sqrt(1.0 / I.measure)
        vals, E, Fv = _alternate(C, starts, from_e, tol, max_iter)
        j = int(np.argmax(vals))
        if best_diag is None or vals[j] > best:
            best, best_i = float(vals[j]), int(i)
            best_diag = (E[j], Fv[j], float(vals.max() - vals.min()))
    value = math.sqrt(max(best, 0.0))
    if report is not None:
        e, f, spread = best_diag
        disp = math.sqrt(best) - math.sqrt(max(best - spread, 0.0))
        report.add("wbmo", value, interval=DyadicIndex.from_heap(best_i), e=e, f=f,
                   dispersion=disp, flagged=bool(disp > WBMO_FLAG), lower_bound=True)
    return value


def wbmo_grid(B: MatrixSymbol, points: int = 721) -> float:
    """Brute-force real WBMO for ``n = 2``: grid over the angles of ``e`` and ``f``."""
    if B.n != 2 or not B.is_real:
        raise ValueError("grid search needs a real 2x2 symbol")
    K = B.depth
    t = np.linspace(0.0, np.pi, points)
    U = np.stack([np.cos(t), np.sin(t)], axis=1)
    best = 0.0
    Bh = B.haar.real
    for i in range(1, 2 ** K):
        I = DyadicIndex.from_heap(i)
        acc = np.zeros((points, points))
        for h in _subtree_heaps(I, K):
            # <B_J e, f> for all (f, e) pairs
            acc += (U @ Bh[h] @ U.T) ** 2
        best = max(best, acc.max() / I.measure)
    return math.sqrt(best)


def bmo_carl(B: MatrixSymbol, report: NormReport | None = None) -> float:
    """``sup_I (1/|I| sum_{J ⊆ I} ||B_J||^2)^{1/2}`` with operator norms."""
    K = B.depth
    sq = np.zeros(2 ** K)
    sq[1:] = _opnorms(B.haar[1:]) ** 2
    local = subtree_sums(sq, K) / measures(K)[: 2 ** K]
    i, I = _argmax_interval(local)
    value = math.sqrt(local[i])
    if report is not None:
        report.add("carl", value, interval=I)
    return value


def abs_symbol(B: MatrixSymbol) -> MatrixSymbol:
    """The scalar symbol ``|B| = sum_I h_I ||B_I||``."""
    h = np.zeros((2 ** B.depth, 1, 1), dtype=complex)
    h[1:, 0, 0] = _opnorms(B.haar[1:])
    return MatrixSymbol(h)


def scalar_bmo_p(phi: MatrixSymbol, p: float) -> float:
    """``sup_I (1/|I| ∫_I |phi - m_I phi|^p)^{1/p}`` for a scalar symbol."""
    if phi.n != 1:
        raise ValueError("scalar_bmo_p needs n = 1")
    if not p > 0:
        raise ValueError("p must be positive")
    K = phi.depth
    best = 0.0
    for level in range(K):
        d = np.abs(_level_diffs(phi, level)[:, 0, 0]) ** p
        best = max(best, float(_block_mean(d, level, K).max()))
    return best ** (1.0 / p)


def vec_norms(b: VectorField) -> tuple[float, float]:
    """``(BMO, wBMO)`` norms of a ``C^n``-valued function."""
    K = b.depth
    mb = interval_means(b.values)
    bmo_sq = 0.0
    for level in range(K):
        d = b.values - np.repeat(mb[level_slice(level)], 2 ** (K - level), axis=0)
        bmo_sq = max(bmo_sq, float(_block_mean(np.sum(np.abs(d) ** 2, axis=1), level, K).max()))
    h = np.asarray(b.haar)
    own = h[:, :, None] * h[:, None, :].conj()
    own[0] = 0
    G = subtree_sums(own, K) / measures(K)[: 2 ** K, None, None]
    w = float(np.linalg.eigvalsh(G[1:])[:, -1].max())
    return math.sqrt(bmo_sq), math.sqrt(max(w, 0.0))


def _dense_ok(B):
    return B.n * 2 ** B.depth <= DENSE_LIMIT


def para_norm(B: MatrixSymbol, domain: str = FULL) -> tuple[float, float]:
    """``(||pi_B||, residual)`` on the full space or the zero-mean subspace."""
    if _dense_ok(B):
        P = assemble_para(B)
        if domain == ZERO_MEAN:
            P = P.restrict_domain()
        return P.norm(), 0.0
    return matrix_free_norm("para", B, domain=domain)


def mult_norm(B: MatrixSymbol) -> tuple[float, float]:
    """``(||Lambda_B||, residual)`` over zero-mean inputs."""
    if _dense_ok(B):
        return assemble_mult(B).norm(), 0.0
    return matrix_free_norm("mult", B)


def operator_norms(B: MatrixSymbol, report: NormReport | None = None) -> dict:
    """``para``, ``spara``, ``so`` and ``mult`` (plus ``para_zero_mean``)."""
    Bs = adjoint(B)
    para, r1 = para_norm(B)
    para0, r0 = para_norm(B, ZERO_MEAN)
    para_adj, r2 = para_norm(Bs)
    mult, r3 = mult_norm(B)
    so = sbmo(B) + sbmo(Bs)
    out = {"para": para, "para_zero_mean": para0, "spara": para + para_adj, "so": so, "mult": mult}
    if report is not None:
        report.add("para", para, residual=r1, zero_mean_value=para0, zero_mean_residual=r0)
        report.add("spara", para + para_adj, residual=max(r1, r2))
        report.add("so", so)
        report.add("mult", mult, residual=r3)
    return out


def norm_value(name: str, B: MatrixSymbol, **kw) -> float:
    """Evaluate one norm by id (see :data:`NORM_NAMES`)."""
    if name == "bmo_norm":
        return bmo_norm(B)
    if name == "sbmo":
        return sbmo(B, check=kw.get("check", False))
    if name == "wbmo":
        return wbmo(B, restarts=kw.get("restarts", WBMO_RESTARTS), seed=kw.get("seed", 0))
    if name == "carl":
        return bmo_carl(B)
    if name == "para":
        return para_norm(B)[0]
    if name == "spara":
        return para_norm(B)[0] + para_norm(adjoint(B))[0]
    if name == "so":
        return sbmo(B, check=False) + sbmo(adjoint(B), check=False)
    if name == "mult":
        return mult_norm(B)[0]
    raise ValueError(f"unknown norm {name!r}; expected one of {NORM_NAMES}")


def compute_norms(B: MatrixSymbol, names="all", *, seed: int = 0, sbmo_rtol: float = SBMO_RTOL) -> NormReport:
    """Evaluate the requested norms into a :class:`NormReport` with diagnostics."""
    if names == "all":
        names = NORM_NAMES
    elif isinstance(names, str):
        names = (names,)
    unknown = set(names) - set(NORM_NAMES)
    if unknown:
        raise ValueError(f"unknown norm(s): {sorted(unknown)}")
    rep = NormReport()
    for name in NORM_NAMES:
        if name not in names:
            continue
        if name == "bmo_norm":
            bmo_norm(B, rep)
        elif name == "sbmo":
            sbmo(B, rep, rtol=sbmo_rtol)
        elif name == "wbmo":
            wbmo(B, rep, seed=seed)
        elif name == "carl":
            bmo_carl(B, rep)
        elif name in ("para", "spara", "so", "mult") and name not in rep.values:
            full = NormReport()
            operator_norms(B, full)
            for k in ("para", "spara", "so", "mult"):
                if k in names:
                    rep.values[k] = full.values[k]
                    if k in full.diagnostics:
                        rep.diagnostics[k] = full.diagnostics[k]
    return rep
