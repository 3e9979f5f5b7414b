"""
Dense linear-algebra kernels used by the wave scheme and the filters.

- Thomas algorithm for tridiagonal systems (single or block right-hand side)
- Symmetric eigendecomposition (LAPACK or cyclic Jacobi rotations)
- Reduced (truncated square-root) decomposition of PSD matrices
- Inverse square root of SPD matrices
"""
from dataclasses import dataclass
from typing import Literal

import numpy as np

from app.exceptions import (
    DimensionError,
    EigenConvergenceError,
    ParameterError,
    RankDeficiencyError,
    SingularMatrixError,
)
from app.utils.logger import get_logger

logger = get_logger(__name__)

EigMethod = Literal["lapack", "jacobi"]

SYMMETRY_TOL = 1e-12
PSD_CLAMP_TOL = 1e-12


@dataclass(frozen=True)
class SymMatrix:
    """Symmetric matrix, symmetrised on construction."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionError(f"Symmetric matrix must be square, got shape {a.shape}")
        scale = float(np.max(np.abs(a))) if a.size else 0.0
        asym = float(np.max(np.abs(a - a.T))) if a.size else 0.0
        if asym > SYMMETRY_TOL * max(scale, 1.0):
            raise ParameterError(f"Matrix is not symmetric (max asymmetry {asym:.3e})")
        object.__setattr__(self, "entries", 0.5 * (a + a.T))

    @property
    def dimension(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def symmetrized(cls, a: np.ndarray) -> "SymMatrix":
        """Wrap a matrix that is symmetric up to round-off."""
        a = np.asarray(a, dtype=float)
        return cls(0.5 * (a + a.T))


def solve_tridiagonal(
    diag: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    rhs: np.ndarray,
) -> np.ndarray:
    """
    Solve A x = rhs for tridiagonal A with the Thomas algorithm.

    Args:
        diag: main diagonal, length n
        lower: sub-diagonal, length n-1 (lower[i] = A[i+1, i])
        upper: super-diagonal, length n-1 (upper[i] = A[i, i+1])
        rhs: right-hand side, shape (n,) or (n, k); all columns are solved at once

    Raises:
        DimensionError: inconsistent lengths
        SingularMatrixError: a zero pivot is met
    """
    b = np.asarray(diag, dtype=float)
    a = np.asarray(lower, dtype=float)
    c = np.asarray(upper, dtype=float)
    d = np.asarray(rhs, dtype=float)

    n = b.shape[0]
    if b.ndim != 1 or a.ndim != 1 or c.ndim != 1:
        raise DimensionError("Diagonals must be vectors")
    if a.shape[0] != n - 1 or c.shape[0] != n - 1:
        raise DimensionError(f"Off-diagonals must have length {n - 1}")
    if d.shape[0] != n or d.ndim > 2:
        raise DimensionError(f"Right-hand side must have {n} rows")

    vector_rhs = d.ndim == 1
    if vector_rhs:
        d = d[:, None]

    cp = np.empty(max(n - 1, 0))
    dp = np.empty_like(d)

    pivot = b[0]
    if pivot == 0.0:
        raise SingularMatrixError("Zero pivot at row 0")
    if n > 1:
        cp[0] = c[0] / pivot
    dp[0] = d[0] / pivot

    for i in range(1, n):
        pivot = b[i] - a[i - 1] * cp[i - 1]
        if pivot == 0.0:
            raise SingularMatrixError(f"Zero pivot at row {i}")
        if i < n - 1:
            cp[i] = c[i] / pivot
        dp[i] = (d[i] - a[i - 1] * dp[i - 1]) / pivot

    x = dp
    for i in range(n - 2, -1, -1):
        x[i] = x[i] - cp[i] * x[i + 1]

    return x[:, 0] if vector_rhs else x


def _fix_signs(vectors: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Flip each column so that its first non-negligible component is positive."""
    out = vectors.copy()
    for j in range(out.shape[1]):
        column = out[:, j]
        significant = np.flatnonzero(np.abs(column) > tol * max(np.max(np.abs(column)), 1e-300))
        if significant.size and column[significant[0]] < 0:
            out[:, j] = -column
    return out


def _jacobi_eig(a: np.ndarray, tol: float, max_sweeps: int) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi rotations; returns unsorted eigenvalues and eigenvectors."""
    a = a.copy()
    n = a.shape[0]
    v = np.eye(n)
    norm = np.linalg.norm(a)
    if n < 2 or norm == 0.0:
        return np.diag(a).copy(), v

    off = np.sqrt(max(np.sum(a * a) - np.sum(np.diag(a) ** 2), 0.0))
    for sweep in range(max_sweeps):
        if off <= tol * norm:
            logger.debug("jacobi converged", sweeps=sweep, residual=off / norm)
            return np.diag(a).copy(), v
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                cos = 1.0 / np.sqrt(t * t + 1.0)
                sin = t * cos
                rot = np.array([[cos, sin], [-sin, cos]])
                idx = [p, q]
                a[:, idx] = a[:, idx] @ rot
                a[idx, :] = rot.T @ a[idx, :]
                a[p, q] = a[q, p] = 0.0
                v[:, idx] = v[:, idx] @ rot
        off = np.sqrt(max(np.sum(a * a) - np.sum(np.diag(a) ** 2), 0.0))

    if off <= tol * norm:
        return np.diag(a).copy(), v
    raise EigenConvergenceError(
        f"Jacobi eigensolver did not converge in {max_sweeps} sweeps",
        residual=off / norm,
    )


def sym_eig(
    a: SymMatrix,
    method: EigMethod = "lapack",
    tol: float = 1e-14,
    max_sweeps: int = 60,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Eigendecomposition of a symmetric matrix.

    Returns:
        (eigenvalues sorted descending, orthonormal eigenvectors as columns);
        each eigenvector has its first significant component positive.
    """
    entries = a.entries
    if method == "lapack":
        values, vectors = np.linalg.eigh(entries)
    elif method == "jacobi":
        values, vectors = _jacobi_eig(entries, tol=tol, max_sweeps=max_sweeps)
    else:
        raise ParameterError(f"Unknown eigensolver: {method}")

    order = np.argsort(values, kind="stable")[::-1]
    return values[order], _fix_signs(vectors[:, order])


def reduced_decomposition(a: SymMatrix, r: int, method: EigMethod = "lapack") -> np.ndarray:
    """
    Truncated square root S = [sqrt(l_1) V_1 ... sqrt(l_r) V_r] of a PSD matrix.

    Eigenvalues below PSD_CLAMP_TOL * l_max are clamped to zero, so S S^T is
    the best rank-r PSD approximation of `a` in Frobenius norm.
    """
    n = a.dimension
    if not 1 <= r <= n:
        raise ParameterError(f"Rank must lie in [1, {n}], got {r}")

    values, vectors = sym_eig(a, method=method)
    top = values[0] if values.size else 0.0
    clamped = np.where(values > PSD_CLAMP_TOL * max(top, 0.0), values, 0.0)
    clamped = np.maximum(clamped, 0.0)
    return vectors[:, :r] * np.sqrt(clamped[:r])


def spd_inv_sqrt(a: SymMatrix, tol: float = 1e-12, method: EigMethod = "lapack") -> SymMatrix:
    """
    Symmetric inverse square root B = V diag(l^-1/2) V^T, so that B A B = I.

    Raises:
        RankDeficiencyError: an eigenvalue is not above tol * l_max; `rank`
            reports how many eigenvalues passed the test.
    """
    values, vectors = sym_eig(a, method=method)
    top = values[0] if values.size else 0.0
    rank = int(np.sum(values > tol * top)) if top > 0 else 0
    if rank < a.dimension:
        raise RankDeficiencyError(
            f"Matrix of dimension {a.dimension} has numerical rank {rank}",
            rank=rank,
        )
    return SymMatrix.symmetrized((vectors / np.sqrt(values)) @ vectors.T)
