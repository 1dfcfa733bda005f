"""Diagonally dominant (DD) and scaled diagonally dominant (SDD) cones.

An N x N symmetric matrix is represented as a sum of C(N,2) exploded
2x2 blocks, one per index pair (i, j) with i < j.  Block p carries
coordinates (x, y, z): x lands on the (i, i) diagonal entry, y on
(j, j), and z on the symmetric off-diagonal pair (i, j)/(j, i).  Pairs
are ordered lexicographically, matching ``numpy.triu_indices(N, 1)``.

Membership in DD/SDD of the assembled matrix is guaranteed when every
block lies in the corresponding 2x2 cone, which gives the log-barriers

    phi_dd  = sum over blocks of (log(x^2 - z^2) + log(y^2 - z^2)) / 2
    phi_sdd = sum over blocks of log(x*y - z^2)

together with the scaled log-det reference

    h(Y) = (N - 1) * log det Y - N * (N - 1) * log(N - 1).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .symmat import cholesky, log_det, is_psd, sym, check_square

INTERIOR_EPS = 1e-14


class BoundaryReached(Exception):
    """A block left the interior of its 2x2 cone.

    ``pair_index`` is the offending position in the lexicographic pair
    order.
    """

    def __init__(self, pair_index: int):
        self.pair_index = pair_index
        super().__init__(f"block {pair_index} is not interior")


class OddOrder(Exception):
    pass


class Cone(enum.Enum):
    DD = "dd"
    SDD = "sdd"


@dataclass(frozen=True)
class BlockSet:
    """Exploded 2x2 block coordinates for an order-N symmetric matrix.

    ``coords`` has shape (C(N,2), 3) with columns (x, y, z).
    """

    order: int
    coords: np.ndarray

    @property
    def npairs(self) -> int:
        return self.order * (self.order - 1) // 2

    def validate(self) -> None:
        expected = (self.npairs, 3)
        if self.coords.shape != expected:
            raise ValueError(f"coords shape {self.coords.shape}, expected {expected}")


@dataclass(frozen=True)
class EdgeColoring:
    """Partition of the C(N,2) pairs into N-1 perfect matchings."""

    order: int
    rounds: list[np.ndarray]


@dataclass(frozen=True)
class SddDecomposition:
    """PSD summands, one per coloring round, adding up to the assembled Y."""

    order: int
    parts: list[np.ndarray]


def pair_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Row/column index arrays of the lexicographic pair order."""
    return np.triu_indices(n, 1)


def identity_blocks(n: int) -> BlockSet:
    """The block set assembling to the identity: every block I/(N-1)."""
    if n < 2:
        raise ValueError(f"order must be at least 2, got {n}")
    p = n * (n - 1) // 2
    coords = np.zeros((p, 3))
    coords[:, 0] = 1.0 / (n - 1)
    coords[:, 1] = 1.0 / (n - 1)
    return BlockSet(n, coords)


def psi_assemble(blocks: BlockSet) -> np.ndarray:
    """Assemble the block coordinates into the full symmetric matrix."""
    blocks.validate()
    n = blocks.order
    rows, cols = pair_indices(n)
    Y = np.zeros((n, n))
    Y[rows, cols] = blocks.coords[:, 2]
    Y += Y.T
    diag = np.zeros(n)
    np.add.at(diag, rows, blocks.coords[:, 0])
    np.add.at(diag, cols, blocks.coords[:, 1])
    Y[np.diag_indices(n)] = diag
    return Y


def is_dd(Y: np.ndarray, tol: float = 0.0) -> bool:
    """Row diagonal dominance with slack: Y[i,i] >= sum(|offdiag|) - tol."""
    check_square(Y)
    offdiag = np.abs(Y) - np.diag(np.abs(np.diag(Y)))
    slack = np.diag(Y) - offdiag.sum(axis=1)
    return bool(np.all(slack >= -tol))


def comparison_matrix(Y: np.ndarray) -> np.ndarray:
    """|diagonal|, negated absolute off-diagonal."""
    M = -np.abs(Y)
    M[np.diag_indices(Y.shape[0])] = np.abs(np.diag(Y))
    return M


def is_sdd(Y: np.ndarray, tol: float = 1e-9) -> bool:
    """SDD membership via positive semidefiniteness of the comparison matrix."""
    check_square(Y)
    return is_psd(comparison_matrix(Y), tol)


def _dd_quantities(coords: np.ndarray) -> np.ndarray:
    x, y, z = coords[:, 0], coords[:, 1], coords[:, 2]
    return np.stack([x, y, x * x - z * z, y * y - z * z], axis=1)


def _sdd_quantities(coords: np.ndarray) -> np.ndarray:
    x, y, z = coords[:, 0], coords[:, 1], coords[:, 2]
    return np.stack([x, y, x * y - z * z], axis=1)


def interior_mask(blocks: BlockSet, kind: Cone, eps: float = INTERIOR_EPS) -> np.ndarray:
    """Per-block flag: all defining quantities of the 2x2 cone exceed eps."""
    q = _dd_quantities(blocks.coords) if kind is Cone.DD else _sdd_quantities(blocks.coords)
    return np.all(q > eps, axis=1)


def in_interior(blocks: BlockSet, kind: Cone, eps: float = INTERIOR_EPS) -> bool:
    return bool(np.all(interior_mask(blocks, kind, eps)))


def _require_interior(blocks: BlockSet, kind: Cone) -> None:
    mask = interior_mask(blocks, kind)
    if not mask.all():
        raise BoundaryReached(int(np.argmax(~mask)))


def phi(blocks: BlockSet, kind: Cone) -> float:
    """Barrier value of the block set for the chosen cone."""
    blocks.validate()
    _require_interior(blocks, kind)
    x, y, z = blocks.coords[:, 0], blocks.coords[:, 1], blocks.coords[:, 2]
    if kind is Cone.DD:
        return float(0.5 * (np.log(x * x - z * z) + np.log(y * y - z * z)).sum())
    return float(np.log(x * y - z * z).sum())


def phi_gradient(blocks: BlockSet, kind: Cone) -> np.ndarray:
    """Blockwise gradient of phi, shape (C(N,2), 3)."""
    blocks.validate()
    _require_interior(blocks, kind)
    x, y, z = blocks.coords[:, 0], blocks.coords[:, 1], blocks.coords[:, 2]
    g = np.empty_like(blocks.coords)
    if kind is Cone.DD:
        u = x * x - z * z
        v = y * y - z * z
        g[:, 0] = x / u
        g[:, 1] = y / v
        g[:, 2] = -z * (1.0 / u + 1.0 / v)
    else:
        d = x * y - z * z
        g[:, 0] = y / d
        g[:, 1] = x / d
        g[:, 2] = -2.0 * z / d
    return g


def phi_hessian(blocks: BlockSet, kind: Cone) -> np.ndarray:
    """Blockwise Hessian of phi, shape (C(N,2), 3, 3).

    These blocks are negative definite (phi is concave on the interior);
    Newton systems negate them to get positive definite blocks.
    """
    blocks.validate()
    _require_interior(blocks, kind)
    x, y, z = blocks.coords[:, 0], blocks.coords[:, 1], blocks.coords[:, 2]
    p = blocks.coords.shape[0]
    H = np.zeros((p, 3, 3))
    if kind is Cone.DD:
        u = x * x - z * z
        v = y * y - z * z
        hxx = -(x * x + z * z) / (u * u)
        hyy = -(y * y + z * z) / (v * v)
        H[:, 0, 0] = hxx
        H[:, 1, 1] = hyy
        H[:, 0, 2] = H[:, 2, 0] = 2.0 * x * z / (u * u)
        H[:, 1, 2] = H[:, 2, 1] = 2.0 * y * z / (v * v)
        H[:, 2, 2] = hxx + hyy
    else:
        d = x * y - z * z
        d2 = d * d
        H[:, 0, 0] = -y * y / d2
        H[:, 1, 1] = -x * x / d2
        H[:, 0, 1] = H[:, 1, 0] = -z * z / d2
        H[:, 0, 2] = H[:, 2, 0] = 2.0 * y * z / d2
        H[:, 1, 2] = H[:, 2, 1] = 2.0 * x * z / d2
        H[:, 2, 2] = -2.0 * (x * y + z * z) / d2
    return H


def h_value(Y: np.ndarray) -> float:
    """Scaled log-det reference: (N-1) log det Y - N(N-1) log(N-1)."""
    check_square(Y)
    n = Y.shape[0]
    return float((n - 1) * log_det(cholesky(Y)) - n * (n - 1) * np.log(n - 1))


def edge_coloring(n: int) -> EdgeColoring:
    """Round-robin partition of all pairs of {0..N-1} into N-1 matchings.

    Requires even N.  The classic circle method: one vertex stays fixed,
    the rest rotate.
    """
    if n < 2 or n % 2:
        raise OddOrder(f"edge coloring needs an even order, got {n}")
    rounds = []
    m = n - 1
    for r in range(m):
        pairs = [(min(n - 1, r), max(n - 1, r))]
        for i in range(1, n // 2):
            a = (r + i) % m
            b = (r - i) % m
            pairs.append((min(a, b), max(a, b)))
        rounds.append(np.array(sorted(pairs), dtype=int))
    return EdgeColoring(n, rounds)


def sdd_decompose(blocks: BlockSet) -> SddDecomposition:
    """Split the assembled matrix into one PSD summand per coloring round.

    Each summand collects the blocks of a perfect matching, so it is
    2x2-block-diagonal up to a permutation; the summands add up to
    ``psi_assemble(blocks)`` and their log-dets add up to ``phi_sdd``.
    """
    blocks.validate()
    n = blocks.order
    coloring = edge_coloring(n)
    rows, cols = pair_indices(n)
    index_of = {(int(i), int(j)): p for p, (i, j) in enumerate(zip(rows, cols))}
    parts = []
    for matching in coloring.rounds:
        Z = np.zeros((n, n))
        for i, j in matching:
            x, y, z = blocks.coords[index_of[(int(i), int(j))]]
            Z[i, i] = x
            Z[j, j] = y
            Z[i, j] = Z[j, i] = z
        parts.append(Z)
    return SddDecomposition(n, parts)
