"""Operator sweep ``S_B``, its bilinear extension and the sweep factorization."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .dyadic import (
    DepthError,
    MatrixSymbol,
    level_slice,
    measures,
)
from .linalg import psd_sqrt

MAX_EXACT_SLOTS = 20


def _accumulate(terms: np.ndarray, depth: int) -> np.ndarray:
    """Cells of ``sum_I chi_I terms[I]`` for heap-indexed ``terms`` (levels < depth)."""
    out = np.zeros((2 ** depth,) + terms.shape[1:], dtype=complex)
    for level in range(depth):
        out += np.repeat(terms[level_slice(level)], 2 ** (depth - level), axis=0)
    return out


def bilinear_sweep(U: MatrixSymbol, V: MatrixSymbol) -> MatrixSymbol:
    """``Delta[U*, V] = sum_I chi_I / |I| U_I* V_I``; mean terms never enter."""
    if (U.n, U.depth) != (V.n, V.depth):
        raise ValueError("U and V must share dimension and depth")
    K = U.depth
    terms = np.conj(np.swapaxes(U.haar, 1, 2)) @ V.haar / measures(K)[: 2 ** K, None, None]
    terms[0] = 0
    return MatrixSymbol.from_cells(_accumulate(terms, K))


def sweep(B: MatrixSymbol) -> MatrixSymbol:
    """``S_B = sum_I chi_I / |I| B_I* B_I``."""
    return bilinear_sweep(B, B)


def sweep_sup(B: MatrixSymbol) -> float:
    """``||S_B||_inf``: largest cellwise operator norm."""
    S = sweep(B).cells
    return float(np.linalg.eigvalsh(0.5 * (S + np.conj(np.swapaxes(S, 1, 2))))[:, -1].max())


def factor_sweep(F: MatrixSymbol, k: int, atol: float = 1e-12) -> MatrixSymbol:
    """A symbol ``B`` with ``S_B = F`` for ``F`` constant on level-``k`` cells.

    All mass sits on level ``k``: ``B_I = |I|^{1/2} (F^I)^{1/2}`` where ``F^I``
    is the value of ``F`` on ``I``.  The result has depth ``max(K, k + 1)``.
    """
    if k < 0:
        raise DepthError("k must be >= 0")
    K = F.depth
    scale = max(1.0, float(np.abs(F.haar).max()))
    if k < K and np.abs(F.haar[2 ** k:]).max(initial=0.0) > atol * scale:
        raise ValueError(f"F is not constant on level-{k} cells")
    depth = max(K, k + 1)
    Fk = F.refine(max(K, k)).cells
    w = 2 ** (max(K, k) - k)
    values = Fk[::w]
    h = np.zeros((2 ** depth, F.n, F.n), dtype=complex)
    root = 2.0 ** (-k / 2)
    for p, Fi in enumerate(values):
        try:
            h[2 ** k + p] = root * psd_sqrt(Fi)
        except ValueError as exc:
            raise ValueError(f"cell {p} of F is not PSD: {exc}") from None
    return MatrixSymbol(h)


@dataclass(frozen=True)
class AverageResult:
    symbol: MatrixSymbol
    samples: int
    exact: bool
    stderr: np.ndarray | None = None

    @property
    def stderr_norm(self) -> float:
        """Frobenius norm of the per-entry standard errors over all cells."""
        return 0.0 if self.stderr is None else float(np.sqrt(np.sum(self.stderr ** 2)))


def _haar_table(depth: int) -> np.ndarray:
    """``(cells, slots)`` table of ``h_I(t)`` for all intervals of level < depth."""
    cells = 2 ** depth
    H = np.zeros((cells, cells - 1))
    m = measures(depth)
    for i in range(1, cells):
        level = i.bit_length() - 1
        w = 2 ** (depth - level)
        p = i - 2 ** level
        H[p * w: p * w + w // 2, i - 1] = 1 / np.sqrt(m[i])
        H[p * w + w // 2: (p + 1) * w, i - 1] = -1 / np.sqrt(m[i])
    return H


def _sign_products(B: MatrixSymbol, signs: np.ndarray) -> np.ndarray:
    """Cells of ``(T_sigma B)* (T_sigma B)`` without the mean, one per sign row."""
    H = _haar_table(B.depth)
    C = B.haar[1:].reshape(B.haar.shape[0] - 1, -1)
    vals = ((signs[:, None, :] * H[None]) @ C).reshape(signs.shape[0], H.shape[0], B.n, B.n)
    return np.conj(np.swapaxes(vals, -1, -2)) @ vals


def martingale_average_sweep(B: MatrixSymbol, mode: str = "exact", samples: int = 10000,
                             seed: int = 0, chunk: int = 4096) -> AverageResult:
    """Average of ``(T_sigma B)* (T_sigma B)`` over sign patterns ``sigma``.

    ``mode="exact"`` enumerates all ``2**(2**K - 1)`` patterns (at most
    :data:`MAX_EXACT_SLOTS` slots); ``"monte_carlo"`` draws ``samples`` seeded
    patterns and reports per-entry standard errors.  ``"auto"`` picks exact
    when it fits.  Only Haar coefficients enter; the mean of ``B`` is dropped.
    """
    slots = 2 ** B.depth - 1
    if mode == "auto":
        mode = "exact" if slots <= MAX_EXACT_SLOTS else "monte_carlo"
    if mode == "exact":
        if slots > MAX_EXACT_SLOTS:
            raise ValueError(f"exact enumeration needs <= {MAX_EXACT_SLOTS} sign slots, got {slots}")
        total = np.zeros((2 ** B.depth, B.n, B.n), dtype=complex)
        patterns = itertools.product((1.0, -1.0), repeat=slots)
        count = 0
        while True:
            block = np.array(list(itertools.islice(patterns, chunk)))
            if block.size == 0:
                break
            total += _sign_products(B, block).sum(axis=0)
            count += block.shape[0]
        return AverageResult(MatrixSymbol.from_cells(total / count), count, True)
    if mode != "monte_carlo":
        raise ValueError(f"unknown mode {mode!r}")
    if samples < 2:
        raise ValueError("Monte-Carlo mode needs at least 2 samples")
    rng = np.random.default_rng(seed)
    s1 = np.zeros((2 ** B.depth, B.n, B.n), dtype=complex)
    s2 = np.zeros((2 ** B.depth, B.n, B.n))
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        block = rng.choice([-1.0, 1.0], size=(m, slots))
        P = _sign_products(B, block)
        s1 += P.sum(axis=0)
        s2 += (np.abs(P) ** 2).sum(axis=0)
        done += m
    mean = s1 / samples
    var = (s2 - samples * np.abs(mean) ** 2) / (samples - 1)
    stderr = np.sqrt(np.clip(var, 0.0, None) / samples)
    return AverageResult(MatrixSymbol.from_cells(mean), samples, False, stderr)
