"""Problem data: SDPA sparse files, normalization, random instances.

Everything downstream assumes the normalized form: constraint matrices
pairwise orthonormal in the trace inner product, the cost matrix unit
norm and trace-orthogonal to every constraint.  ``normalize`` performs
the change of basis and records enough bookkeeping to map objective
values back to the original data.

Objective convention is minimization, ``min Tr(C X)``.  SDPA sparse
files state ``max Tr(F0 Y)``, so the parser negates the cost block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .symmat import sym


class SdpaSyntaxError(Exception):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class InconsistentDimensions(Exception):
    pass


class IndexOutOfBlock(Exception):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class RankDeficientConstraints(Exception):
    def __init__(self, index: int):
        self.index = index
        super().__init__(f"constraint {index} is linearly dependent on its predecessors")


class TooManyConstraints(Exception):
    pass


class NoInteriorPointFound(Exception):
    pass


@dataclass(frozen=True)
class RawSdp:
    """min Tr(C X) s.t. Tr(A[i] X) = b[i], X PSD."""

    name: str
    C: np.ndarray
    A: np.ndarray
    b: np.ndarray
    block_structure: tuple[int, ...]

    @property
    def order(self) -> int:
        return self.C.shape[0]

    @property
    def num_constraints(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class NormalizedSdp:
    """Same feasible set as the raw problem, orthonormal data.

    ``transform`` is the upper-triangular change of basis with
    svec(A_raw[i]) = sum_j transform[j, i] * svec(A[j]).  ``proj`` holds
    the coefficients of the raw cost along the constraint basis, so for
    any symmetric X

        Tr(C_raw X) = cost_scale * Tr(C X) + sum_i proj[i] * Tr(A[i] X)

    and on the feasible set the trailing sum is the constant
    ``cost_offset = proj @ b``.  ``cost_scale`` is zero when the raw
    cost is a combination of constraint matrices (degenerate cost).
    """

    name: str
    C: np.ndarray
    A: np.ndarray
    b: np.ndarray
    cost_scale: float
    cost_offset: float
    proj: np.ndarray
    transform: np.ndarray

    @property
    def order(self) -> int:
        return self.C.shape[0]

    @property
    def num_constraints(self) -> int:
        return self.A.shape[0]


def svec(A: np.ndarray) -> np.ndarray:
    """Upper-triangle vectorization with sqrt(2) off-diagonal weights.

    Isometric: svec(A) @ svec(B) == Tr(A B) for symmetric A, B.
    """
    n = A.shape[0]
    rows, cols = np.triu_indices(n)
    w = np.where(rows == cols, 1.0, np.sqrt(2.0))
    return w * A[rows, cols]


def unsvec(v: np.ndarray, n: int) -> np.ndarray:
    rows, cols = np.triu_indices(n)
    w = np.where(rows == cols, 1.0, np.sqrt(2.0))
    A = np.zeros((n, n))
    A[rows, cols] = v / w
    return A + np.triu(A, 1).T


def _tokenize(text: str) -> list[tuple[str, int]]:
    tokens = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped[0] in "*\"":
            continue
        for ch in ",{}()":
            stripped = stripped.replace(ch, " ")
        for tok in stripped.split():
            tokens.append((tok, lineno))
    return tokens


class _TokenStream:
    def __init__(self, tokens: list[tuple[str, int]]):
        self.tokens = tokens
        self.pos = 0
        self.line = 1

    def __len__(self) -> int:
        return len(self.tokens) - self.pos

    def next_int(self, what: str) -> int:
        tok, self.line = self._next(what)
        try:
            return int(tok)
        except ValueError:
            raise SdpaSyntaxError(self.line, f"expected integer {what}, got {tok!r}") from None

    def next_float(self, what: str) -> float:
        tok, self.line = self._next(what)
        try:
            return float(tok)
        except ValueError:
            raise SdpaSyntaxError(self.line, f"expected number {what}, got {tok!r}") from None

    def _next(self, what: str) -> tuple[str, int]:
        if self.pos >= len(self.tokens):
            raise SdpaSyntaxError(self.line, f"unexpected end of file, expected {what}")
        item = self.tokens[self.pos]
        self.pos += 1
        return item


def parse_sdpa(text: str, name: str = "sdpa") -> RawSdp:
    """Parse SDPA sparse format into dense min-form data.

    Block sizes may be negative (diagonal blocks); blocks are flattened
    into one dense matrix of order sum(|size|).  Comment lines start
    with ``*`` or ``"``.
    """
    stream = _TokenStream(_tokenize(text))
    m = stream.next_int("constraint count")
    nblocks = stream.next_int("block count")
    if m <= 0 or nblocks <= 0:
        raise InconsistentDimensions(f"need positive counts, got m={m}, nblocks={nblocks}")
    sizes = [stream.next_int(f"size of block {k + 1}") for k in range(nblocks)]
    if any(s == 0 for s in sizes):
        raise InconsistentDimensions(f"zero-size block in {sizes}")
    b = np.array([stream.next_float(f"rhs entry {i + 1}") for i in range(m)])

    offsets = np.concatenate([[0], np.cumsum([abs(s) for s in sizes])])
    n = int(offsets[-1])
    F = np.zeros((m + 1, n, n))
    while len(stream):
        matno = stream.next_int("matrix number")
        blkno = stream.next_int("block number")
        i = stream.next_int("row index")
        j = stream.next_int("column index")
        value = stream.next_float("entry value")
        line = stream.line
        if not 0 <= matno <= m:
            raise InconsistentDimensions(f"line {line}: matrix number {matno} outside 0..{m}")
        if not 1 <= blkno <= nblocks:
            raise IndexOutOfBlock(line, f"block number {blkno} outside 1..{nblocks}")
        size = sizes[blkno - 1]
        width = abs(size)
        if not (1 <= i <= width and 1 <= j <= width):
            raise IndexOutOfBlock(line, f"entry ({i},{j}) outside block of size {width}")
        if size < 0 and i != j:
            raise IndexOutOfBlock(line, f"off-diagonal entry ({i},{j}) in diagonal block {blkno}")
        gi = int(offsets[blkno - 1]) + i - 1
        gj = int(offsets[blkno - 1]) + j - 1
        F[matno, gi, gj] = value
        F[matno, gj, gi] = value

    return RawSdp(name=name, C=-F[0], A=F[1:].copy(), b=b,
                  block_structure=tuple(sizes))


def write_sdpa(raw: RawSdp, comment: str | None = None) -> str:
    """Serialize to SDPA sparse format (single dense block).

    Inverse of :func:`parse_sdpa` up to block structure: the cost is
    negated back to the max-form F0 and only upper-triangle nonzeros
    are emitted, with full float round-trip precision.
    """
    n = raw.order
    lines = []
    if comment:
        lines.append(f"* {comment}")
    lines.append(str(raw.num_constraints))
    lines.append("1")
    lines.append(str(n))
    lines.append(" ".join(repr(float(v)) for v in raw.b))
    mats = np.concatenate([-raw.C[None], raw.A], axis=0)
    for matno in range(mats.shape[0]):
        rows, cols = np.nonzero(np.triu(mats[matno]))
        for i, j in zip(rows, cols):
            lines.append(f"{matno} 1 {i + 1} {j + 1} {repr(float(mats[matno, i, j]))}")
    return "\n".join(lines) + "\n"


def normalize(raw: RawSdp, rank_tol: float = 1e-10) -> NormalizedSdp:
    """Orthonormalize constraints, project and rescale the cost."""
    n, m = raw.order, raw.num_constraints
    V = np.stack([svec(sym(raw.A[i])) for i in range(m)], axis=1)
    Q, R = np.linalg.qr(V)
    # pin the factorization's sign freedom: positive diagonal of R, so
    # already-orthonormal input is a fixed point
    signs = np.where(np.diag(R) < 0.0, -1.0, 1.0)
    Q = Q * signs
    R = R * signs[:, None]
    diag = np.abs(np.diag(R))
    bad = np.nonzero(diag <= rank_tol * diag.max())[0]
    if bad.size:
        raise RankDeficientConstraints(int(bad[0]))
    A_n = np.stack([unsvec(Q[:, i], n) for i in range(m)], axis=0)
    b_n = solve_triangular(R, raw.b, trans="T", lower=False)

    c = svec(sym(raw.C))
    proj = Q.T @ c
    c_perp = c - Q @ proj
    scale = float(np.linalg.norm(c_perp))
    if scale <= 1e-12 * max(1.0, float(np.linalg.norm(c))):
        C_n = np.zeros((n, n))
        scale = 0.0
    else:
        C_n = unsvec(c_perp / scale, n)
    return NormalizedSdp(name=raw.name, C=C_n, A=A_n, b=b_n,
                         cost_scale=scale, cost_offset=float(proj @ b_n),
                         proj=proj, transform=R)


def recover_objective(norm: NormalizedSdp, X: np.ndarray) -> float:
    """Original-data objective Tr(C_raw X) for any symmetric X."""
    value = norm.cost_scale * float(np.tensordot(norm.C, X))
    value += float(norm.proj @ np.tensordot(norm.A, X, axes=([1, 2], [0, 1])))
    return value


def random_sdp(n: int, m: int, seed: int) -> RawSdp:
    """Dense Gaussian instance with the identity strictly feasible."""
    if m > n * (n + 1) // 2 - 1:
        raise TooManyConstraints(f"m={m} leaves no room for a cost with n={n}")
    rng = np.random.default_rng(seed)
    A = np.stack([sym(rng.standard_normal((n, n))) for _ in range(m)], axis=0)
    C = sym(rng.standard_normal((n, n)))
    b = np.einsum("kii->k", A)
    return RawSdp(name=f"random-{n}-{m}-{seed}", C=C, A=A, b=b,
                  block_structure=(n,))


def phase1_init(norm: NormalizedSdp, margin: float = 1e-10) -> np.ndarray:
    """A strictly feasible positive definite starting point.

    Preference order: the identity when it happens to be feasible, then
    the minimum-Frobenius-norm feasible point, then that point inflated
    along feasibility-preserving directions.
    """
    n, m = norm.order, norm.num_constraints
    traces = np.einsum("kii->k", norm.A)
    if np.allclose(traces, norm.b, rtol=0.0, atol=1e-12 * max(1.0, float(np.abs(norm.b).max()))):
        return np.eye(n)

    X_ls = np.einsum("k,kij->ij", norm.b, norm.A)

    def strictly_pd(X: np.ndarray) -> bool:
        w = np.linalg.eigvalsh(sym(X))
        return bool(w[0] > margin * max(1.0, float(w[-1])))

    if strictly_pd(X_ls):
        return sym(X_ls)

    def orthogonal_part(D: np.ndarray) -> np.ndarray:
        coeff = np.tensordot(norm.A, D, axes=([1, 2], [0, 1]))
        return D - np.einsum("k,kij->ij", coeff, norm.A)

    rng = np.random.default_rng(0)
    directions = [orthogonal_part(np.eye(n))]
    directions += [orthogonal_part(sym(rng.standard_normal((n, n)))) for _ in range(8)]
    for P in directions:
        if np.linalg.norm(P) <= 1e-12:
            continue
        for k in range(-10, 41):
            X = X_ls + (2.0 ** k) * P
            if strictly_pd(X):
                return sym(X)
    raise NoInteriorPointFound(f"no positive definite feasible point found for {norm.name}")
