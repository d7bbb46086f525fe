"""Seeded verification suite: exact identities and constant-1 inequalities.

Each sample draws its own generator ``default_rng([seed, i])``, so results do
not depend on the number of worker threads or on evaluation order.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dyadic import (
    MatrixSymbol,
    SignPattern,
    VectorField,
    adjoint,
    expectation,
    expectation_field,
    haar_synthesis,
    interval_means,
    martingale_transform,
    pointwise_apply,
)
from .hardy import (
    circledast,
    circledast_expanded,
    dual_pointwise_rhs,
    martingale_maximal,
    maximal,
    pairing,
)
from .norms import bmo_carl, bmo_norm, sbmo, sbmo_formulas, wbmo
from .operators import (
    apply_matrix_free,
    assemble_delta,
    assemble_diag,
    assemble_mult,
    assemble_para,
    diag_norm,
)
from .sweep import bilinear_sweep, factor_sweep, martingale_average_sweep, sweep, sweep_sup

INEQ_SLACK = 1e-9
EXACT_AVERAGE_DEPTH = 3

# identity name -> tolerance as a multiple of the suite tolerance
IDENTITIES = {
    "haar_roundtrip": 1.0,
    "para_adjoint": 1.0,
    "mult_split": 1.0,
    "mult_form": 1.0,
    "mult_adjoint_compression": 1.0,
    "bidentity": 1.0,
    "sweep_polarization": 1.0,
    "transform_adjoint": 1.0,
    "matrix_free_apply": 1.0,
    "sbmo_five_way": 100.0,
    "circledast_expansions": 0.1,
    "circledast_bilinear": 0.1,
    "circledast_expectation": 0.1,
    "pairing_duality": 1.0,
    "martingale_average": 0.01,
    "factor_roundtrip": 10.0,
}
INEQUALITIES = (
    "wbmo_le_sbmo",
    "sbmo_le_bmo_norm",
    "sbmo_le_mult",
    "mult_le_spara",
    "sbmo_le_carl",
    "diag_le_para_product",
    "para_product_le_mult_plus_diag",
    "sbmo_sq_le_sweep_sup",
    "pointwise_sweep",
    "dual_pointwise",
    "dual_l1",
)


@dataclass
class CheckResult:
    name: str
    kind: str
    tolerance: float
    max_violation: float = 0.0
    samples: int = 0
    worst_sample: int | None = None

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tolerance

    def to_json(self, seed: int) -> dict:
        return {"name": self.name, "kind": self.kind, "status": "pass" if self.passed else "fail",
                "max_violation": self.max_violation, "tolerance": self.tolerance,
                "samples": self.samples, "worst_sample": self.worst_sample, "seed": seed}


@dataclass
class VerifySuiteResult:
    seed: int
    samples: int
    n_max: int
    K_max: int
    tol: float
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_json(self) -> dict:
        return {"format": "opbmo/1", "kind": "verify", "seed": self.seed, "samples": self.samples,
                "n_max": self.n_max, "K_max": self.K_max, "tol": self.tol, "passed": self.passed,
                "checks": [c.to_json(self.seed) for c in self.checks]}


def rel_err(a, b, scale=None) -> float:
    """Frobenius distance relative to ``scale`` (default: the larger norm; 0 when both vanish)."""
    a, b = np.asarray(a), np.asarray(b)
    if scale is None:
        scale = max(np.linalg.norm(a), np.linalg.norm(b))
    return 0.0 if scale == 0 else float(np.linalg.norm(a - b) / scale)


def slack(lhs, rhs) -> float:
    """Largest relative excess of ``lhs`` over ``rhs``; positive means violated."""
    lhs, rhs = np.atleast_1d(np.asarray(lhs, float)), np.atleast_1d(np.asarray(rhs, float))
    scale = np.maximum(np.abs(lhs), np.abs(rhs))
    v = np.where(scale > 0, (lhs - rhs) / np.where(scale > 0, scale, 1.0), 0.0)
    return float(v.max())


def mult_by_form(B: MatrixSymbol, f: VectorField) -> VectorField:
    """``B f - sum_I (m_I B) f_I h_I`` for zero-mean ``f``."""
    K = B.depth
    mB = interval_means(B.cells)[: 2 ** K]
    terms = (mB @ np.asarray(f.haar)[:, :, None])[:, :, 0]
    terms[0] = 0
    return VectorField(pointwise_apply(B, f).values - haar_synthesis(terms))


def _embed_rows(M, n):
    """Zero-mean codomain matrix padded with the ``n`` mean rows."""
    return np.vstack([np.zeros((n, M.shape[1]), dtype=complex), M])


def _random_psd_level(rng, n, K, k):
    G = rng.standard_normal((2 ** k, n, n)) + 1j * rng.standard_normal((2 ** k, n, n))
    vals = G @ np.conj(np.swapaxes(G, 1, 2))
    return MatrixSymbol.from_cells(np.repeat(vals, 2 ** (K - k), axis=0))


def run_sample(seed: int, i: int, n_max: int, K_max: int) -> dict:
    """All checks on one random draw; returns ``name -> violation`` (skipped checks absent)."""
    rng = np.random.default_rng([seed, i])
    n = int(rng.integers(1, n_max + 1))
    K = int(rng.integers(1, K_max + 1))
    real = bool(rng.random() < 0.25)
    B = MatrixSymbol.random(rng, n, K, real=real)
    V = MatrixSymbol.random(rng, n, K, real=real)
    Bs = adjoint(B)
    f = VectorField.random(rng, n, K, zero_mean=True)
    g = VectorField.random(rng, n, K)
    out = {}

    out["haar_roundtrip"] = rel_err(MatrixSymbol(B.haar).cells, haar_synthesis(B.haar))

    P, D = assemble_para(B), assemble_delta(Bs)
    out["para_adjoint"] = rel_err(P.adjoint().matrix, D.matrix)
    L = assemble_mult(B, check=False)
    out["mult_split"] = rel_err(L.matrix, (P + assemble_delta(B)).restrict_domain().matrix)
    out["mult_form"] = rel_err(apply_matrix_free("mult", B, f).values, mult_by_form(B, f).values)
    Ls = assemble_mult(Bs, check=False)
    out["mult_adjoint_compression"] = rel_err(np.conj(L.matrix[n:].T), Ls.matrix[n:])

    PU, PV = P, assemble_para(V)
    papa = (np.conj(PU.matrix.T) @ PV.matrix)[:, n:]
    Delta = bilinear_sweep(B, V)
    LD = assemble_mult(Delta, check=False).matrix
    Dm = _embed_rows(assemble_diag(B, V).matrix, n)
    out["bidentity"] = rel_err(papa, LD + Dm)

    polar = sum(1j ** k * sweep(V + B * (1j ** k)).cells for k in range(4)) / 4
    out["sweep_polarization"] = rel_err(Delta.cells, polar)

    sigma = SignPattern.random(rng, K)
    out["transform_adjoint"] = rel_err(adjoint(martingale_transform(B, sigma)).cells,
                                       martingale_transform(Bs, sigma).cells)
    for kind, M in (("para", P), ("mult", L)):
        x = VectorField.random(rng, n, K, zero_mean=(kind == "mult"))
        dense = M.apply(x).values
        out["matrix_free_apply"] = max(out.get("matrix_free_apply", 0.0),
                                       rel_err(apply_matrix_free(kind, B, x).values, dense))

    forms = sbmo_formulas(B)
    top = max(float(v[1:].max()) for v in forms.values())
    ref = forms["a"]
    out["sbmo_five_way"] = 0.0 if top == 0 else max(
        float(np.abs(v[1:] - ref[1:]).max()) / top for v in forms.values())

    fg = circledast(f, g, check=False)
    out["circledast_expansions"] = rel_err(fg.cells, circledast_expanded(f, g).cells)
    f2 = VectorField.random(rng, n, K)
    c = complex(rng.standard_normal(), rng.standard_normal())
    lhs = circledast(f + f2 * c, g, check=False).cells
    out["circledast_bilinear"] = rel_err(lhs, fg.cells + c * circledast(f2, g, check=False).cells)
    out["circledast_expectation"] = max(
        rel_err(expectation(MatrixSymbol.from_cells(fg.cells), k).cells,
                circledast(expectation_field(f, k), expectation_field(g, k), check=False).cells,
                np.linalg.norm(fg.cells))
        for k in range(K + 1))

    lam = apply_matrix_free("mult", B, f)
    lhs, rhs = pairing(B, fg), lam.inner(g)
    scale = float(np.abs(B.cells).max()) * f.l2_norm() * g.l2_norm()
    out["pairing_duality"] = 0.0 if scale == 0 else abs(lhs - rhs) / scale

    if K <= EXACT_AVERAGE_DEPTH:
        out["martingale_average"] = rel_err(martingale_average_sweep(B).symbol.cells, sweep(B).cells)

    k = int(rng.integers(0, K))
    F = _random_psd_level(rng, n, K, k)
    out["factor_roundtrip"] = rel_err(sweep(factor_sweep(F, k)).cells, F.cells)

    # inequalities
    s = sbmo(B, check=False)
    mult = L.norm()
    out["wbmo_le_sbmo"] = slack(wbmo(B, seed=i), s)
    out["sbmo_le_bmo_norm"] = slack(s, bmo_norm(B))
    out["sbmo_le_mult"] = slack(s, mult)
    out["mult_le_spara"] = slack(mult, P.norm() + assemble_para(Bs).norm())
    out["sbmo_le_carl"] = slack(s, bmo_carl(B))
    papa_norm = float(np.linalg.norm(papa, 2)) if papa.size else 0.0
    dn = diag_norm(B, V)
    out["diag_le_para_product"] = slack(dn, papa_norm)
    out["para_product_le_mult_plus_diag"] = slack(papa_norm, assemble_mult(Delta, check=False).norm() + dn)
    out["sbmo_sq_le_sweep_sup"] = slack(s ** 2, sweep_sup(B))
    SU, SV = sweep(B).cells, sweep(V).cells
    top_eig = lambda S: np.linalg.eigvalsh(0.5 * (S + np.conj(np.swapaxes(S, 1, 2))))[:, -1]  # noqa: E731
    lhs = np.linalg.norm(Delta.cells, ord=2, axis=(1, 2))
    out["pointwise_sweep"] = slack(lhs, np.sqrt(np.clip(top_eig(SU) * top_eig(SV), 0, None)))
    fg_max = martingale_maximal(fg)
    out["dual_pointwise"] = slack(fg_max, dual_pointwise_rhs(f, g))
    l2 = lambda a: float(np.sqrt(np.mean(a ** 2)))  # noqa: E731
    out["dual_l1"] = slack(fg_max.mean(), l2(maximal(f)) * l2(maximal(g)) + f.l2_norm() * g.l2_norm())
    return out


def verify_suite(seed: int = 0, samples: int = 200, n_max: int = 4, K_max: int = 4,
                 tol: float = 1e-10, workers: int = 1) -> VerifySuiteResult:
    """Run every identity and inequality check over ``samples`` seeded draws.

    Identity checks pass when the relative error stays within ``tol`` times a
    per-check factor; inequality checks pass when the relative excess stays
    below ``1e-9`` regardless of ``tol``.  Failures are recorded, not raised.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if n_max < 1 or K_max < 1:
        raise ValueError("n_max and K_max must be >= 1")
    if tol < 0:
        raise ValueError("tol must be >= 0")
    job = lambda i: run_sample(seed, i, n_max, K_max)  # noqa: E731
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            rows = list(ex.map(job, range(samples)))
    else:
        rows = [job(i) for i in range(samples)]
    res = VerifySuiteResult(seed, samples, n_max, K_max, tol)
    checks = [CheckResult(name, "identity", tol * fac) for name, fac in IDENTITIES.items()]
    checks += [CheckResult(name, "inequality", INEQ_SLACK, -np.inf) for name in INEQUALITIES]
    for c in checks:
        for i, row in enumerate(rows):
            if c.name not in row:
                continue
            v = float(row[c.name])
            c.samples += 1
            if c.worst_sample is None or v > c.max_violation:
                c.max_violation, c.worst_sample = v, i
        if c.samples == 0:
            c.max_violation = 0.0
    res.checks = checks
    return res
