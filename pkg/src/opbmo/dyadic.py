"""Dyadic intervals, Haar analysis/synthesis and finite-depth symbols.

Everything lives on depth-``K`` cells of ``[0, 1)``: a function is piecewise
constant on the ``2**K`` cells, so every integral is a finite sum.

Haar coefficients are stored in heap order: row ``0`` holds the mean over
``[0, 1)`` and row ``2**l + p`` holds the coefficient of the interval
``(l, p)``.  The Haar function of ``I`` is ``+|I|**-0.5`` on the left half
of ``I`` and ``-|I|**-0.5`` on the right half.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


class DepthError(ValueError):
    """Raised when an interval or coefficient does not fit the depth."""


def _frozen(a):
    a = np.array(a, dtype=complex)
    a.flags.writeable = False
    return a


def log2_exact(m: int) -> int:
    if m < 1 or m & (m - 1):
        raise ValueError(f"cell count {m} is not a power of two")
    return m.bit_length() - 1


@dataclass(frozen=True, order=True)
class DyadicIndex:
    """The dyadic interval ``[pos * 2**-level, (pos + 1) * 2**-level)``."""

    level: int
    pos: int

    def __post_init__(self):
        if self.level < 0 or not 0 <= self.pos < 2 ** self.level:
            raise ValueError(f"invalid dyadic interval ({self.level}, {self.pos})")

    @classmethod
    def from_heap(cls, i: int) -> "DyadicIndex":
        if i < 1:
            raise ValueError("heap index must be >= 1")
        level = i.bit_length() - 1
        return cls(level, i - 2 ** level)

    @property
    def heap(self) -> int:
        return 2 ** self.level + self.pos

    @property
    def measure(self) -> float:
        return 2.0 ** -self.level

    @property
    def parent(self) -> "DyadicIndex | None":
        if self.level == 0:
            return None
        return DyadicIndex(self.level - 1, self.pos // 2)

    @property
    def children(self) -> tuple["DyadicIndex", "DyadicIndex"]:
        return (DyadicIndex(self.level + 1, 2 * self.pos),
                DyadicIndex(self.level + 1, 2 * self.pos + 1))

    def contains(self, other: "DyadicIndex") -> bool:
        if other.level < self.level:
            return False
        return other.pos >> (other.level - self.level) == self.pos

    def cells(self, depth: int) -> slice:
        """Slice of the depth-``depth`` cells covered by this interval."""
        if self.level > depth:
            raise DepthError(f"interval at level {self.level} is deeper than depth {depth}")
        w = 2 ** (depth - self.level)
        return slice(self.pos * w, (self.pos + 1) * w)

    def haar_values(self, depth: int) -> np.ndarray:
        """Values of ``h_I`` on the cells it covers (length ``2**(depth-level)``)."""
        if self.level >= depth:
            raise DepthError(f"h_I for level {self.level} is not constant on depth-{depth} cells")
        w = 2 ** (depth - self.level)
        v = np.full(w, 2.0 ** (self.level / 2))
        v[w // 2:] *= -1
        return v


def intervals(depth: int):
    """All intervals with level < depth, in heap order."""
    for i in range(1, 2 ** depth):
        yield DyadicIndex.from_heap(i)


def level_slice(level: int) -> slice:
    return slice(2 ** level, 2 ** (level + 1))


# -- transforms on the leading axis -------------------------------------------

def haar_analysis(cells) -> np.ndarray:
    """Cell values -> heap-ordered Haar coefficients (row 0 is the mean).

    Works on any array whose leading axis enumerates the cells.
    """
    cells = np.asarray(cells)
    depth = log2_exact(cells.shape[0])
    out = np.empty(cells.shape, dtype=np.result_type(cells.dtype, float))
    avg = cells
    for level in range(depth - 1, -1, -1):
        left, right = avg[0::2], avg[1::2]
        out[level_slice(level)] = (left - right) * (0.5 * 2.0 ** (-level / 2))
        avg = 0.5 * (left + right)
    out[0] = avg[0]
    return out


def haar_synthesis(haar) -> np.ndarray:
    """Inverse of :func:`haar_analysis`."""
    haar = np.asarray(haar)
    depth = log2_exact(haar.shape[0])
    avg = haar[0:1]
    for level in range(depth):
        c = haar[level_slice(level)] * 2.0 ** (level / 2)
        nxt = np.empty((2 * avg.shape[0],) + avg.shape[1:], dtype=np.result_type(avg, c))
        nxt[0::2] = avg + c
        nxt[1::2] = avg - c
        avg = nxt
    return avg


def interval_means(cells) -> np.ndarray:
    """Heap array of averages: entry ``2**l + p`` is ``m_I`` for ``I = (l, p)``.

    Levels run from 0 to ``depth`` (the cells themselves); entry 0 repeats the
    global mean.
    """
    cells = np.asarray(cells)
    depth = log2_exact(cells.shape[0])
    out = np.empty((2 ** (depth + 1),) + cells.shape[1:], dtype=cells.dtype)
    avg = cells
    out[level_slice(depth)] = avg
    for level in range(depth - 1, -1, -1):
        avg = 0.5 * (avg[0::2] + avg[1::2])
        out[level_slice(level)] = avg
    out[0] = out[1]
    return out


def ancestor_heaps(depth: int) -> np.ndarray:
    """``(2**depth, depth + 1)`` table: heap index of the level-``l`` ancestor of each cell."""
    cell = np.arange(2 ** depth)
    return np.stack([2 ** l + (cell >> (depth - l)) for l in range(depth + 1)], axis=1)


def measures(depth: int) -> np.ndarray:
    """Heap array of ``|I|`` for levels ``0 .. depth`` (entry 0 set to 1)."""
    idx = np.arange(2 ** (depth + 1))
    idx[0] = 1
    lev = np.floor(np.log2(idx)).astype(int)
    return 2.0 ** -lev


def subtree_sums(per_interval: np.ndarray, depth: int) -> np.ndarray:
    """Heap array whose entry ``I`` is the sum of ``per_interval[J]`` over ``J ⊆ I``.

    ``per_interval`` is heap-indexed with entries for levels ``< depth``.
    """
    out = np.array(per_interval, copy=True)
    for level in range(depth - 2, -1, -1):
        sl = level_slice(level)
        child = out[level_slice(level + 1)]
        out[sl] += child[0::2] + child[1::2]
    return out


# -- data types ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SignPattern:
    """Signs ``sigma_I`` for every interval of level < depth, heap order."""

    depth: int
    signs: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.signs, dtype=float)
        if s.shape != (2 ** self.depth - 1,):
            raise ValueError(f"need {2 ** self.depth - 1} signs for depth {self.depth}, got {s.shape}")
        if not np.all(np.abs(s) == 1):
            raise ValueError("signs must be +1 or -1")
        s.flags.writeable = False
        object.__setattr__(self, "signs", s)

    @classmethod
    def ones(cls, depth: int) -> "SignPattern":
        return cls(depth, np.ones(2 ** depth - 1))

    @classmethod
    def random(cls, rng: np.random.Generator, depth: int) -> "SignPattern":
        return cls(depth, rng.choice([-1.0, 1.0], size=2 ** depth - 1))

    def __getitem__(self, I: DyadicIndex) -> float:
        return float(self.signs[I.heap - 1])


def _check_depth(depth):
    if depth < 1:
        raise DepthError("depth must be >= 1")


@dataclass(frozen=True, eq=False)
class MatrixSymbol:
    """An ``n x n`` matrix-valued function of Haar depth ``depth``.

    ``haar[0]`` is the mean ``m_T B``; ``haar[2**l + p]`` is ``B_I``.
    """

    haar: np.ndarray

    def __post_init__(self):
        h = _frozen(self.haar)
        if h.ndim != 3 or h.shape[1] != h.shape[2]:
            raise ValueError(f"expected (2**K, n, n) coefficients, got {h.shape}")
        if h.shape[1] == 0:
            raise ValueError("matrix dimension must be >= 1")
        _check_depth(log2_exact(h.shape[0]))
        object.__setattr__(self, "haar", h)

    # constructors
    @classmethod
    def from_cells(cls, cells) -> "MatrixSymbol":
        return cls(haar_analysis(np.asarray(cells, dtype=complex)))

    @classmethod
    def from_coeffs(cls, n: int, depth: int, dc=None, coeffs=None) -> "MatrixSymbol":
        """Build from a mean and a mapping ``DyadicIndex -> n x n`` (missing = 0)."""
        _check_depth(depth)
        h = np.zeros((2 ** depth, n, n), dtype=complex)
        if dc is not None:
            h[0] = dc
        for I, A in (coeffs or {}).items():
            if I.level >= depth:
                raise DepthError(f"coefficient at level {I.level} needs depth > {I.level}")
            h[I.heap] = A
        return cls(h)

    @classmethod
    def constant(cls, A, depth: int) -> "MatrixSymbol":
        A = np.atleast_2d(np.asarray(A, dtype=complex))
        return cls.from_coeffs(A.shape[0], depth, dc=A)

    @classmethod
    def random(cls, rng: np.random.Generator, n: int, depth: int, real: bool = False) -> "MatrixSymbol":
        """Gaussian coefficients scaled by ``|I|**0.5`` so all levels weigh alike."""
        shape = (2 ** depth, n, n)
        h = rng.standard_normal(shape)
        if not real:
            h = h + 1j * rng.standard_normal(shape)
        return cls(h * np.sqrt(measures(depth)[: 2 ** depth])[:, None, None])

    # shape
    @property
    def n(self) -> int:
        return self.haar.shape[1]

    @property
    def depth(self) -> int:
        return self.haar.shape[0].bit_length() - 1

    @property
    def dc(self) -> np.ndarray:
        return self.haar[0]

    @property
    def coeffs(self) -> np.ndarray:
        """Heap-ordered coefficients with the mean slot zeroed."""
        c = np.array(self.haar)
        c[0] = 0
        return c

    def coeff(self, I: DyadicIndex) -> np.ndarray:
        if I.level >= self.depth:
            return np.zeros((self.n, self.n), dtype=complex)
        return self.haar[I.heap]

    @cached_property
    def cells(self) -> np.ndarray:
        c = haar_synthesis(self.haar)
        c.flags.writeable = False
        return c

    @property
    def is_real(self) -> bool:
        return not np.any(self.haar.imag)

    # algebra
    def __add__(self, other):
        if isinstance(other, MatrixSymbol):
            _check_match(self, other)
            return MatrixSymbol(self.haar + other.haar)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, MatrixSymbol):
            _check_match(self, other)
            return MatrixSymbol(self.haar - other.haar)
        return NotImplemented

    def __mul__(self, c):
        return MatrixSymbol(self.haar * complex(c))

    __rmul__ = __mul__

    def __neg__(self):
        return MatrixSymbol(-self.haar)

    def plus_constant(self, A) -> "MatrixSymbol":
        h = np.array(self.haar)
        h[0] += A
        return MatrixSymbol(h)

    def without_mean(self) -> "MatrixSymbol":
        return MatrixSymbol(self.coeffs)

    def refine(self, depth: int) -> "MatrixSymbol":
        """The same function viewed at a larger depth (zero-padded tail)."""
        if depth < self.depth:
            raise DepthError("refine cannot reduce depth")
        h = np.zeros((2 ** depth, self.n, self.n), dtype=complex)
        h[: 2 ** self.depth] = self.haar
        return MatrixSymbol(h)

    def column(self, e) -> "VectorField":
        """The vector field ``t -> B(t) e``."""
        return VectorField(self.cells @ np.asarray(e, dtype=complex))

    def allclose(self, other: "MatrixSymbol", rtol=1e-12, atol=1e-12) -> bool:
        return (self.n, self.depth) == (other.n, other.depth) and np.allclose(
            self.haar, other.haar, rtol=rtol, atol=atol)

    def __repr__(self):
        return f"MatrixSymbol(n={self.n}, depth={self.depth})"


def _check_match(a, b):
    if (a.n, a.depth) != (b.n, b.depth):
        raise ValueError(f"dimension/depth mismatch: (n={a.n}, K={a.depth}) vs (n={b.n}, K={b.depth})")


@dataclass(frozen=True, eq=False)
class VectorField:
    """A ``C^n``-valued function stored as values on the ``2**depth`` cells."""

    values: np.ndarray

    def __post_init__(self):
        v = _frozen(self.values)
        if v.ndim != 2 or v.shape[1] == 0:
            raise ValueError(f"expected (2**K, n) values, got {v.shape}")
        _check_depth(log2_exact(v.shape[0]))
        object.__setattr__(self, "values", v)

    @classmethod
    def from_haar(cls, haar) -> "VectorField":
        return cls(haar_synthesis(np.asarray(haar, dtype=complex)))

    @classmethod
    def basis(cls, n: int, depth: int, I: DyadicIndex | None, j: int) -> "VectorField":
        """``h_I e_j``, or the constant ``e_j`` when ``I`` is None."""
        h = np.zeros((2 ** depth, n), dtype=complex)
        h[0 if I is None else I.heap, j] = 1
        return cls.from_haar(h)

    @classmethod
    def random(cls, rng: np.random.Generator, n: int, depth: int, zero_mean: bool = False,
               real: bool = False) -> "VectorField":
        shape = (2 ** depth, n)
        v = rng.standard_normal(shape)
        if not real:
            v = v + 1j * rng.standard_normal(shape)
        f = cls(v)
        return f.without_mean() if zero_mean else f

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def depth(self) -> int:
        return self.values.shape[0].bit_length() - 1

    @cached_property
    def haar(self) -> np.ndarray:
        h = haar_analysis(self.values)
        h.flags.writeable = False
        return h

    @property
    def mean(self) -> np.ndarray:
        return self.haar[0]

    def without_mean(self) -> "VectorField":
        return VectorField(self.values - self.mean)

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) / self.values.shape[0]))

    def inner(self, other: "VectorField") -> complex:
        """``<self, other>_{L^2}``, linear in ``self``."""
        return complex(np.sum(self.values * other.values.conj()) / self.values.shape[0])

    def __add__(self, other):
        return VectorField(self.values + other.values)

    def __sub__(self, other):
        return VectorField(self.values - other.values)

    def __mul__(self, c):
        return VectorField(self.values * complex(c))

    __rmul__ = __mul__

    def __repr__(self):
        return f"VectorField(n={self.n}, depth={self.depth})"


# -- operations ------------------------------------------------------------------

def moments(B: MatrixSymbol, I: DyadicIndex):
    """``(m_I B, B_I, P_I B)`` where ``P_I B = sum_{J ⊆ I} h_J B_J`` as a symbol."""
    K = B.depth
    if I.level > K:
        raise DepthError(f"interval level {I.level} exceeds depth {K}")
    mean = B.cells[I.cells(K)].mean(axis=0)
    h = np.zeros_like(B.haar)
    for level in range(I.level, K):
        w = 2 ** (level - I.level)
        lo = 2 ** level + I.pos * w
        h[lo:lo + w] = B.haar[lo:lo + w]
    return mean, B.coeff(I), MatrixSymbol(h)


def expectation(B: MatrixSymbol, k: int) -> MatrixSymbol:
    """Conditional expectation onto level-``k`` cells: keep the mean and levels < k."""
    if not 0 <= k <= B.depth:
        raise DepthError(f"k={k} outside [0, {B.depth}]")
    h = np.zeros_like(B.haar)
    h[: 2 ** k] = B.haar[: 2 ** k]
    return MatrixSymbol(h)


def expectation_field(f: VectorField, k: int) -> VectorField:
    if not 0 <= k <= f.depth:
        raise DepthError(f"k={k} outside [0, {f.depth}]")
    h = np.zeros_like(f.haar)
    h[: 2 ** k] = f.haar[: 2 ** k]
    return VectorField.from_haar(h)


def adjoint(B: MatrixSymbol) -> MatrixSymbol:
    return MatrixSymbol(np.conj(np.swapaxes(B.haar, 1, 2)))


def martingale_transform(B: MatrixSymbol, sigma: SignPattern) -> MatrixSymbol:
    """``T_sigma B``: multiply each ``B_I`` by ``sigma_I``, keep the mean."""
    if sigma.depth != B.depth:
        raise ValueError(f"sign pattern has depth {sigma.depth}, symbol has {B.depth}")
    h = np.array(B.haar)
    h[1:] *= sigma.signs[:, None, None]
    return MatrixSymbol(h)


def pointwise_apply(B: MatrixSymbol, f: VectorField) -> VectorField:
    _check_match(B, f)
    return VectorField(np.einsum("tij,tj->ti", B.cells, f.values))


def build_rademacher(coeffs, depth: int) -> MatrixSymbol:
    """``sum_k B_k r_k`` with ``r_k = sum_{|I| = 2**-k} |I|**0.5 h_I``, k = 1..N."""
    coeffs = [np.atleast_2d(np.asarray(c, dtype=complex)) for c in coeffs]
    if not coeffs:
        raise ValueError("need at least one Rademacher coefficient")
    N = len(coeffs)
    if N >= depth:
        raise DepthError(f"N={N} Rademacher terms need depth > {N}, got {depth}")
    n = coeffs[0].shape[0]
    h = np.zeros((2 ** depth, n, n), dtype=complex)
    for k, Bk in enumerate(coeffs, start=1):
        h[level_slice(k)] = 2.0 ** (-k / 2) * Bk
    return MatrixSymbol(h)
