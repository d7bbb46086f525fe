"""Witness families and a seeded ratio search between norms."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dyadic import MatrixSymbol, adjoint, build_rademacher
from .norms import NORM_NAMES, norm_value
from .sweep import sweep

FAMILY_KINDS = ("rank_one_rademacher", "carleson_diagonal", "diagonal_scalar")
DEGENERATE = 1e-12


@dataclass(frozen=True)
class FamilySpec:
    kind: str
    N: int | None = None
    depth: int | None = None
    n: int | None = None
    scalars: tuple = ()


@dataclass(frozen=True)
class Family:
    symbol: MatrixSymbol
    expected: dict = field(default_factory=dict)


def rank_one_rademacher(N: int, depth: int | None = None, n: int | None = None) -> Family:
    """``B = sum_{k=1}^N (h ⊗ e_k) r_k`` with ``h = e_0``.

    ``SBMO(B) = WBMO(B) = WBMO(B*) = 1`` while ``SBMO(B*) = sqrt(N)``.
    """
    depth = N + 1 if depth is None else depth
    n = N + 1 if n is None else n
    if N < 1:
        raise ValueError("N must be >= 1")
    if n < N + 1:
        raise ValueError(f"rank_one_rademacher needs n >= N + 1 = {N + 1}, got {n}")
    if depth <= N:
        raise ValueError(f"rank_one_rademacher needs depth > N = {N}, got {depth}")
    eye = np.eye(n)
    coeffs = [np.outer(eye[0], eye[k]) for k in range(1, N + 1)]
    B = build_rademacher(coeffs, depth)
    r = math.sqrt(N)
    return Family(B, {"sbmo": 1.0, "wbmo": 1.0, "carl": r,
                      "adj:sbmo": r, "adj:wbmo": 1.0, "adj:sbmo/adj:wbmo": r})


def carleson_diagonal(depth: int) -> Family:
    """``B = sum_I h_I |I|^{1/2} e_I ⊗ e_I`` with one basis vector per interval.

    ``n = 2**depth - 1``; every cell value is diagonal with entries ``0, ±1``.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    n = 2 ** depth - 1
    h = np.zeros((2 ** depth, n, n), dtype=complex)
    for i in range(1, 2 ** depth):
        level = i.bit_length() - 1
        h[i, i - 1, i - 1] = 2.0 ** (-level / 2)
    return Family(MatrixSymbol(h), {"carl": math.sqrt(depth), "cell_norm": 1.0,
                                    "sbmo": 1.0, "adj:sbmo": 1.0, "wbmo": 1.0})


def diagonal_scalar(scalars, n: int | None = None) -> Family:
    """``B(t) = sum_k b_k(t) e_k ⊗ e_k`` from scalar symbols of equal depth."""
    scalars = list(scalars)
    if not scalars:
        raise ValueError("need at least one scalar symbol")
    depth = scalars[0].depth
    if any(s.n != 1 or s.depth != depth for s in scalars):
        raise ValueError("scalar symbols must have n = 1 and equal depth")
    n = len(scalars) if n is None else n
    if n < len(scalars):
        raise ValueError("n is smaller than the number of scalar symbols")
    h = np.zeros((2 ** depth, n, n), dtype=complex)
    for k, s in enumerate(scalars):
        h[:, k, k] = s.haar[:, 0, 0]
    return Family(MatrixSymbol(h))


def family(spec: FamilySpec) -> Family:
    if spec.kind == "rank_one_rademacher":
        if spec.N is None:
            raise ValueError("rank_one_rademacher needs N")
        return rank_one_rademacher(spec.N, spec.depth, spec.n)
    if spec.kind == "carleson_diagonal":
        if spec.depth is None:
            raise ValueError("carleson_diagonal needs depth")
        if spec.n is not None and spec.n != 2 ** spec.depth - 1:
            raise ValueError(f"carleson_diagonal at depth {spec.depth} needs n = {2 ** spec.depth - 1}")
        return carleson_diagonal(spec.depth)
    if spec.kind == "diagonal_scalar":
        return diagonal_scalar(spec.scalars, spec.n)
    raise ValueError(f"unknown family {spec.kind!r}; expected one of {FAMILY_KINDS}")


# -- norm expressions -------------------------------------------------------------

def parse_norm_expr(expr: str) -> tuple[str, str, int]:
    """``[adj:|sweep:]name[^2]`` -> ``(transform, name, power)``."""
    transform = ""
    body = expr.strip()
    for t in ("adj:", "sweep:"):
        if body.startswith(t):
            transform, body = t[:-1], body[len(t):]
    power = 1
    if body.endswith("^2"):
        body, power = body[:-2], 2
    if body not in NORM_NAMES:
        raise ValueError(f"unknown norm {body!r} in {expr!r}; expected one of {NORM_NAMES}")
    return transform, body, power


def eval_norm_expr(expr: str, B: MatrixSymbol, **kw) -> float:
    transform, name, power = parse_norm_expr(expr)
    if transform == "adj":
        B = adjoint(B)
    elif transform == "sweep":
        B = sweep(B)
    return norm_value(name, B, **kw) ** power


# -- ratio search ---------------------------------------------------------------------

@dataclass(frozen=True)
class SearchConfig:
    numerator: str
    denominator: str
    n: int
    depth: int
    restarts: int = 4
    steps: int = 100
    step: float = 0.5
    decay: float = 0.95
    seed: int = 0
    real: bool = False
    wbmo_restarts: int = 8

    def __post_init__(self):
        parse_norm_expr(self.numerator)
        parse_norm_expr(self.denominator)
        if self.n < 1 or self.depth < 1 or self.restarts < 1 or self.steps < 0:
            raise ValueError("n, depth and restarts must be >= 1, steps >= 0")


@dataclass
class SearchResult:
    symbol: MatrixSymbol
    ratio: float
    trace: list
    restart_best: list
    restart: int


class DegenerateSearch(ValueError):
    pass


def _ratio(cfg: SearchConfig, B: MatrixSymbol) -> float | None:
    kw = {"restarts": cfg.wbmo_restarts, "seed": cfg.seed}
    den = eval_norm_expr(cfg.denominator, B, **kw)
    if den <= DEGENERATE:
        return None
    return eval_norm_expr(cfg.numerator, B, **kw) / den


def _one_restart(cfg: SearchConfig, r: int, start: MatrixSymbol | None):
    rng = np.random.default_rng([cfg.seed, r])
    B = start if start is not None else MatrixSymbol.random(rng, cfg.n, cfg.depth, real=cfg.real)
    best = _ratio(cfg, B)
    if best is None:
        return None
    trace = [best]
    K = cfg.depth
    scale = float(np.sqrt(np.mean(np.abs(B.haar[1:]) ** 2))) or 1.0
    step = cfg.step * scale
    for _ in range(cfg.steps):
        i = int(rng.integers(1, 2 ** K))
        level = i.bit_length() - 1
        bump = rng.standard_normal((cfg.n, cfg.n))
        if not cfg.real:
            bump = bump + 1j * rng.standard_normal((cfg.n, cfg.n))
        h = np.array(B.haar)
        h[i] += step * 2.0 ** (-level / 2) * bump
        cand = MatrixSymbol(h)
        val = _ratio(cfg, cand)
        if val is not None and val > best:
            B, best = cand, val
        else:
            step *= cfg.decay
        trace.append(best)
    return B, best, trace


def ratio_search(cfg: SearchConfig, seed_symbol: MatrixSymbol | None = None, workers: int = 1) -> SearchResult:
    """Maximize ``numerator / denominator`` by seeded restarts and coefficient bumps.

    Restart 0 starts from ``seed_symbol`` when given.  Each step perturbs one
    Haar coefficient by a Gaussian matrix; rejected steps shrink the step
    size.  The result is deterministic in ``cfg.seed`` and independent of
    ``workers``.
    """
    if seed_symbol is not None and (seed_symbol.n, seed_symbol.depth) != (cfg.n, cfg.depth):
        raise ValueError("seed symbol does not match the configured n and depth")
    starts = [seed_symbol if (r == 0) else None for r in range(cfg.restarts)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            runs = list(ex.map(lambda r: _one_restart(cfg, r, starts[r]), range(cfg.restarts)))
    else:
        runs = [_one_restart(cfg, r, starts[r]) for r in range(cfg.restarts)]
    live = [(res[1], -r, r) for r, res in enumerate(runs) if res is not None]
    if not live:
        raise DegenerateSearch("every restart had a zero denominator")
    _, _, r_best = max(live)
    trace, running = [], -math.inf
    for res in runs:
        if res is None:
            continue
        for v in res[2]:
            running = max(running, v)
            trace.append(running)
    return SearchResult(runs[r_best][0], runs[r_best][1], trace,
                        [None if res is None else res[1] for res in runs], r_best)


# -- growth curves ---------------------------------------------------------------------

GROWTH_COLUMNS = ("n", "depth", "seed", "numerator", "denominator", "ratio", "fit_log", "fit_log2", "residual")


def _growth_symbol(mode, n, depth):
    if mode == "rank_one_rademacher":
        if n < 2:
            raise ValueError("rank_one_rademacher needs n >= 2")
        N = n - 1
        return rank_one_rademacher(N, max(depth, N + 1), n).symbol
    if mode == "carleson_diagonal":
        K = (n + 1).bit_length() - 1
        if 2 ** K - 1 != n:
            raise ValueError(f"carleson_diagonal needs n = 2**K - 1, got {n}")
        return carleson_diagonal(K).symbol
    raise ValueError(f"unknown growth mode {mode!r}")


def growth_curve(numerator: str, denominator: str, ns, depth: int, mode: str = "search", *,
                 restarts: int = 4, steps: int = 50, seed: int = 0, workers: int = 1) -> list[dict]:
    """Best ratio per ``n`` plus least-squares fits ``ratio ≈ a log(n+1)`` and ``≈ b log(n+1)^2``.

    ``mode`` is ``"search"`` (random restarts) or a family name evaluated at
    its largest member for each ``n``.  ``residual`` is the per-row residual
    of the ``log(n+1)`` fit.  No pass/fail judgement is made.
    """
    ns = list(ns)
    if not ns:
        raise ValueError("n list is empty")
    rows = []
    for n in ns:
        if mode == "search":
            cfg = SearchConfig(numerator, denominator, n, depth, restarts=restarts, steps=steps, seed=seed)
            res = ratio_search(cfg, workers=workers)
            ratio, K = res.ratio, depth
        else:
            B = _growth_symbol(mode, n, depth)
            ratio, K = eval_norm_expr(numerator, B) / eval_norm_expr(denominator, B), B.depth
        rows.append({"n": n, "depth": K, "seed": seed, "numerator": numerator,
                     "denominator": denominator, "ratio": ratio})
    x1 = np.log(np.array(ns) + 1.0)
    x2 = x1 ** 2
    r = np.array([row["ratio"] for row in rows])
    a = float(r @ x1 / (x1 @ x1)) if np.any(x1) else 0.0
    b = float(r @ x2 / (x2 @ x2)) if np.any(x2) else 0.0
    for row, xi, ri in zip(rows, x1, r):
        row.update(fit_log=a, fit_log2=b, residual=float(ri - a * xi))
    return rows

