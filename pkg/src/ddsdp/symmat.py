"""Dense symmetric-matrix primitives: Cholesky factors, congruences,
trace inner products and log-determinants.

Matrices are plain float64 numpy arrays.  The Cholesky convention
throughout the package is upper-triangular: ``X = U.T @ U``.  Inverses
are never formed explicitly; everything goes through triangular solves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

PIVOT_TOL = 1e-10


class NotPositiveDefinite(Exception):
    """Raised when a Cholesky pivot falls below the relative threshold.

    ``index`` is the row of the first failing pivot.
    """

    def __init__(self, index: int, pivot: float):
        self.index = index
        self.pivot = pivot
        super().__init__(f"pivot {pivot:.3e} at row {index} is not acceptably positive")


class DimensionMismatch(Exception):
    pass


@dataclass(frozen=True)
class CholFactor:
    """Upper-triangular factor ``upper`` with ``X = upper.T @ upper``."""

    upper: np.ndarray

    @property
    def order(self) -> int:
        return self.upper.shape[0]


def sym(A: np.ndarray) -> np.ndarray:
    """Symmetric part of ``A``."""
    return 0.5 * (A + A.T)


def check_square(A: np.ndarray) -> None:
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {A.shape}")


def cholesky(X: np.ndarray, pivot_tol: float = PIVOT_TOL) -> CholFactor:
    """Factor ``X = U.T @ U`` with U upper triangular.

    Fails with :class:`NotPositiveDefinite` as soon as a pivot drops to
    ``pivot_tol`` times the largest diagonal entry of ``X`` (so the
    threshold is relative to the matrix scale, and ``pivot_tol = 0``
    demands only strict positivity).
    """
    check_square(X)
    n = X.shape[0]
    A = np.array(X, dtype=float)
    U = np.zeros((n, n))
    scale = float(np.max(np.diag(A))) if n else 0.0
    threshold = pivot_tol * max(scale, 0.0)
    for i in range(n):
        pivot = A[i, i] - U[:i, i] @ U[:i, i]
        if pivot <= threshold or not np.isfinite(pivot):
            raise NotPositiveDefinite(i, float(pivot))
        U[i, i] = np.sqrt(pivot)
        if i + 1 < n:
            U[i, i + 1:] = (A[i, i + 1:] - U[:i, i] @ U[:i, i + 1:]) / U[i, i]
    return CholFactor(U)


def frob_inner(A: np.ndarray, B: np.ndarray) -> float:
    """Trace inner product ``Tr(A.T B)``."""
    if A.shape != B.shape:
        raise DimensionMismatch(f"shapes {A.shape} and {B.shape} differ")
    return float(np.tensordot(A, B))


def congruence(A: np.ndarray, factor: CholFactor, inverse: bool = False) -> np.ndarray:
    """Congruence transform of a symmetric ``A`` by the factor ``U``.

    Forward: ``U @ A @ U.T``.  With ``inverse=True``: ``U^-1 @ A @ U^-T``,
    computed by two triangular solves, so the two directions undo each
    other and the inverse image of the identity is the inverse of the
    factored matrix.
    """
    check_square(A)
    U = factor.upper
    if A.shape[0] != U.shape[0]:
        raise DimensionMismatch(f"matrix order {A.shape[0]} vs factor order {U.shape[0]}")
    if not inverse:
        return sym(U @ A @ U.T)
    W = solve_triangular(U, A, lower=False)
    R = solve_triangular(U, W.T, lower=False).T
    return sym(R)


def log_det(factor: CholFactor) -> float:
    """log det of the factored matrix, ``2 * sum(log(diag(U)))``."""
    return float(2.0 * np.sum(np.log(np.diag(factor.upper))))


def is_psd(X: np.ndarray, tol: float = 1e-9) -> bool:
    """True iff ``X + tol*I`` admits a Cholesky factorization."""
    check_square(X)
    shifted = sym(X) + tol * np.eye(X.shape[0])
    try:
        cholesky(shifted, pivot_tol=0.0)
    except NotPositiveDefinite:
        return False
    return True


def inv_from_factor(factor: CholFactor) -> np.ndarray:
    """Inverse of the factored matrix: ``X^-1 = U^-1 @ U^-T``."""
    Uinv = solve_triangular(factor.upper, np.eye(factor.order), lower=False)
    return sym(Uinv @ Uinv.T)


def random_symmetric(rng: np.random.Generator, n: int) -> np.ndarray:
    return sym(rng.standard_normal((n, n)))


def random_spd(rng: np.random.Generator, n: int, shift: float = 0.1) -> np.ndarray:
    G = rng.standard_normal((n, n))
    return G @ G.T + shift * np.eye(n)
