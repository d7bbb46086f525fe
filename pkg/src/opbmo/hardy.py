"""The ⊛ product, the multiplier pairing, dyadic maximal and square functions."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dyadic import (
    MatrixSymbol,
    VectorField,
    ancestor_heaps,
    haar_analysis,
    haar_synthesis,
    interval_means,
    log2_exact,
    measures,
)
from .sweep import _accumulate, sweep

CIRCLEDAST_TOL = 1e-11


class ExpansionMismatch(AssertionError):
    pass


@dataclass(frozen=True, eq=False)
class TraceField:
    """Matrix cell values playing the trace-class role in the pairing."""

    cells: np.ndarray

    def __post_init__(self):
        c = np.array(self.cells, dtype=complex)
        if c.ndim != 3 or c.shape[1] != c.shape[2]:
            raise ValueError(f"expected (2**K, n, n) cells, got {c.shape}")
        log2_exact(c.shape[0])
        c.flags.writeable = False
        object.__setattr__(self, "cells", c)

    @property
    def n(self) -> int:
        return self.cells.shape[1]

    @property
    def depth(self) -> int:
        return self.cells.shape[0].bit_length() - 1

    @property
    def haar(self) -> np.ndarray:
        return haar_analysis(self.cells)

    def trace_norms(self) -> np.ndarray:
        return np.linalg.svd(self.cells, compute_uv=False).sum(axis=1)

    def __add__(self, other):
        return TraceField(self.cells + other.cells)

    def __mul__(self, c):
        return TraceField(self.cells * complex(c))

    __rmul__ = __mul__


def _outer(x, y):
    """``x ⊗ y`` as the matrix ``x y*`` (so ``(x ⊗ y) h = <h, y> x``)."""
    return x[..., :, None] * np.conj(y[..., None, :])


def _check(f, g):
    if (f.n, f.depth) != (g.n, g.depth):
        raise ValueError("fields must share dimension and depth")


def circledast_expanded(f: VectorField, g: VectorField) -> TraceField:
    """``f ⊗ g - m f ⊗ m g - sum_I chi_I / |I| f_I ⊗ g_I``; equals ``f ⊛ g``."""
    _check(f, g)
    K = f.depth
    fh, gh = np.asarray(f.haar), np.asarray(g.haar)
    terms = _outer(fh, gh) / measures(K)[: 2 ** K, None, None]
    terms[0] = 0
    return TraceField(_outer(f.values, g.values) - _outer(fh[0], gh[0]) - _accumulate(terms, K))


def circledast(f: VectorField, g: VectorField, check: bool = True) -> TraceField:
    """``f ⊛ g = sum_I h_I (f_I ⊗ m_I g + m_I f ⊗ g_I)``.

    With ``check`` the result is compared against :func:`circledast_expanded`.
    """
    _check(f, g)
    K = f.depth
    fh, gh = np.asarray(f.haar), np.asarray(g.haar)
    mf = interval_means(f.values)[: 2 ** K]
    mg = interval_means(g.values)[: 2 ** K]
    h = _outer(fh, mg) + _outer(mf, gh)
    h[0] = 0
    out = haar_synthesis(h)
    if check:
        err = np.abs(out - circledast_expanded(f, g).cells).max()
        scale = max(1.0, float(np.abs(f.values).max() * np.abs(g.values).max()))
        if err > CIRCLEDAST_TOL * scale * 2 ** K:
            raise ExpansionMismatch(f"⊛ expansions disagree by {err:.3g}")
    return TraceField(out)


def pairing(B: MatrixSymbol, F: TraceField) -> complex:
    """``∫ <B(t), F(t)> dt`` with ``<U, x ⊗ y> = <U x, y>``, i.e. ``trace(U F)``.

    This makes ``pairing(B, f ⊛ g) = <Lambda_B f, g>`` for zero-mean ``f``.
    """
    if (B.n, B.depth) != (F.n, F.depth):
        raise ValueError("symbol and trace field must share dimension and depth")
    return complex(np.einsum("tij,tji->", B.cells, F.cells) / F.cells.shape[0])


def _profile(F) -> np.ndarray:
    if isinstance(F, TraceField):
        return F.trace_norms()
    if isinstance(F, VectorField):
        return np.linalg.norm(F.values, axis=1)
    if isinstance(F, MatrixSymbol):
        return np.linalg.svd(F.cells, compute_uv=False).sum(axis=1)
    a = np.asarray(F)
    if a.ndim == 1:
        return np.abs(a)
    raise TypeError(f"cannot take the maximal function of {type(F).__name__}")


def maximal(F) -> np.ndarray:
    """Dyadic maximal function: per cell, the largest ancestor average of ``||F||``.

    ``||.||`` is the trace norm for matrices, the Euclidean norm for vectors
    and the absolute value for scalar arrays.
    """
    prof = _profile(F)
    K = log2_exact(prof.shape[0])
    means = interval_means(prof)
    return means[ancestor_heaps(K)].max(axis=1)


def martingale_maximal(F: TraceField) -> np.ndarray:
    """``sup_k ||(E_k F)(t)||_{S_1}`` over ``k = 0..K``."""
    K = F.depth
    means = interval_means(F.cells)
    anc = means[ancestor_heaps(K)]
    return np.linalg.svd(anc, compute_uv=False).sum(axis=-1).max(axis=1)


def square_function(phi: MatrixSymbol) -> tuple[np.ndarray, float]:
    """Cells of ``(sum_I |phi_I|^2 chi_I / |I|)^{1/2}`` and its ``L^1`` norm."""
    if phi.n != 1:
        raise ValueError("square_function needs a scalar symbol")
    s = np.sqrt(np.clip(sweep(phi).cells[:, 0, 0].real, 0.0, None))
    return s, float(s.mean())


def dual_pointwise_rhs(f: VectorField, g: VectorField) -> np.ndarray:
    """Per cell: ``f*(t) g*(t) + sum_I chi_I(t)/|I| ||f_I|| ||g_I||``."""
    K = f.depth
    fh, gh = np.asarray(f.haar), np.asarray(g.haar)
    terms = np.linalg.norm(fh, axis=1) * np.linalg.norm(gh, axis=1) / measures(K)[: 2 ** K]
    terms[0] = 0
    return maximal(f) * maximal(g) + _accumulate(terms, K).real
