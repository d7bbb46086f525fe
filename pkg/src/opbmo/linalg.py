"""Dense spectral primitives: operator norm, power iteration, PSD square root."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Matrices with both sides at most this size get a full SVD.
DENSE_LIMIT = 4096
EIG_TOL = 1e-10
PSD_CLAMP = 1e-10


class ConvergenceError(RuntimeError):
    def __init__(self, msg, value, residual):
        super().__init__(f"{msg} (value={value:.6g}, residual={residual:.3g})")
        self.value = value
        self.residual = residual


@dataclass(frozen=True)
class PowerResult:
    value: float
    vector: np.ndarray
    residual: float
    iterations: int
    converged: bool


def _finite(M):
    M = np.asarray(M)
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    return M


def power_norm(apply, apply_adj, dim: int, *, shift: float = 0.0, max_iter: int = 20000,
               tol: float = 1e-15, seed: int = 0, dtype=complex) -> PowerResult:
    """Largest singular value of a linear map given only ``x -> Ax`` and ``y -> A*y``.

    Power iteration on ``A*A - shift`` with a Rayleigh quotient on ``A*A``.
    Stops when the quotient changes by less than ``tol`` relative; ``residual``
    is ``||A*A v - lambda v|| / lambda`` at the final iterate.
    """
    if dim == 0:
        return PowerResult(0.0, np.zeros(0, dtype), 0.0, 0, True)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dim)
    if np.issubdtype(np.dtype(dtype), np.complexfloating):
        v = v + 1j * rng.standard_normal(dim)
    v = v / np.linalg.norm(v)
    lam = 0.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        w = apply_adj(apply(v))
        new = float(np.real(np.vdot(v, w)))
        w = w - shift * v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            lam, converged = max(new, 0.0), True
            break
        v = w / nw
        if abs(new - lam) <= tol * max(abs(new), 1e-300):
            lam, converged = new, True
            break
        lam = new
    w = apply_adj(apply(v))
    lam = max(float(np.real(np.vdot(v, w))), lam)
    res = float(np.linalg.norm(w - lam * v) / lam) if lam > 0 else 0.0
    return PowerResult(float(np.sqrt(max(lam, 0.0))), v, res, it, converged)


def op_norm(M, *, method: str = "auto") -> float:
    """Largest singular value of a dense matrix.

    ``method`` is ``"svd"``, ``"power"`` or ``"auto"`` (SVD up to
    :data:`DENSE_LIMIT` on both sides, power iteration above).
    """
    M = _finite(M)
    if M.size == 0:
        return 0.0
    if method == "auto":
        method = "svd" if max(M.shape) <= DENSE_LIMIT else "power"
    if method == "svd":
        return float(np.linalg.svd(M, compute_uv=False)[0])
    if method != "power":
        raise ValueError(f"unknown method {method!r}")
    Mh = M.conj().T
    r = power_norm(lambda x: M @ x, lambda y: Mh @ y, M.shape[1], dtype=M.dtype if np.iscomplexobj(M) else float)
    if not r.converged:
        raise ConvergenceError("power iteration did not converge", r.value, r.residual)
    return r.value


def top_eig(H):
    """Largest eigenvalue and unit eigenvector of a Hermitian matrix."""
    w, V = np.linalg.eigh(H)
    return float(w[-1]), V[:, -1]


def psd_sqrt(M) -> np.ndarray:
    """Hermitian PSD square root via eigendecomposition.

    Eigenvalues down to ``-PSD_CLAMP * max(1, ||M||)`` are clamped to zero.
    """
    M = _finite(np.asarray(M, dtype=complex))
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("psd_sqrt needs a square matrix")
    scale = max(1.0, float(np.abs(M).max(initial=0.0)))
    if np.abs(M - M.conj().T).max(initial=0.0) > 1e-12 * scale:
        raise ValueError("matrix is not Hermitian")
    w, V = np.linalg.eigh(0.5 * (M + M.conj().T))
    if w.size and w[0] < -PSD_CLAMP * scale:
        raise ValueError(f"matrix has negative eigenvalue {w[0]:.3g}")
    w = np.clip(w, 0.0, None)
    return (V * np.sqrt(w)) @ V.conj().T
