"""Equality-constrained Newton solvers over DD/SDD block coordinates.

A subproblem lives on the affine slice {m : J m = r} of the block
coordinate space, where the rows of J express the original constraints
after congruence by the current Cholesky factor.  Identity blocks are
always feasible for the slice, so every solve starts there, stays
exactly feasible (Newton steps lie in the null space of J), and stays
strictly interior through backtracking.

Two subproblems share the Newton core:

* centering: minimize -phi(m) subject to the slice (optionally with the
  cost pinned as an extra row);
* decrease: minimize the cost over the slice intersected with the cone,
  via the usual path-following sequence mu * cost - phi(m).

The KKT system is solved by block elimination: the Hessian is
block-diagonal with 3x3 blocks, so only the (rows x rows) Schur
complement is factored densely.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .cones import BlockSet, Cone, identity_blocks, in_interior, phi, phi_gradient, phi_hessian, psi_assemble, pair_indices
from .symmat import CholFactor, sym
from .problem import NormalizedSdp


class SingularKkt(Exception):
    pass


class MaxIterationsExceeded(Exception):
    pass


class Unbounded(Exception):
    """The decrease subproblem's cost fell through the configured floor."""


@dataclass(frozen=True)
class LineSearchConfig:
    """Backtracking parameters; alpha in (0, 0.5), beta in (0, 1).

    ``eta = (1 - 2 alpha) / 4`` is the decrement level below which a
    damped Newton step is guaranteed to enter the quadratic regime.
    """

    alpha: float = 0.25
    beta: float = 0.5
    max_backtracks: int = 60

    def __post_init__(self):
        if not 0.0 < self.alpha < 0.5:
            raise ValueError(f"alpha must lie in (0, 0.5), got {self.alpha}")
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")

    @property
    def eta(self) -> float:
        return (1.0 - 2.0 * self.alpha) / 4.0


@dataclass(frozen=True)
class AffineSlice:
    """Constraint rows of a subproblem in block-coordinate space.

    ``jacobian`` has shape (R, C(N,2), 3); row r applied to coordinates
    m is sum_p jacobian[r, p] @ m[p].  ``cost`` holds the coordinates of
    the congruence-transformed cost functional, and ``cost_trace`` its
    value at identity blocks.  When ``has_cost_row`` is set, the last
    jacobian row pins the cost at ``cost_trace``.
    """

    order: int
    jacobian: np.ndarray
    rhs: np.ndarray
    cost: np.ndarray
    cost_trace: float
    has_cost_row: bool

    @property
    def nrows(self) -> int:
        return self.jacobian.shape[0]


@dataclass
class NewtonState:
    """Outcome of one subproblem solve."""

    blocks: BlockSet
    value: float
    decrement: float
    decrement0: float
    nu: np.ndarray
    tau: float | None
    iterations: int
    backtracks: int
    residual: float


def _adjoint_rows(mats: np.ndarray, n: int) -> np.ndarray:
    """Coordinates of Tr(W Psi(.)) for each W in a stack of matrices."""
    rows, cols = pair_indices(n)
    out = np.empty((mats.shape[0], rows.size, 3))
    out[:, :, 0] = mats[:, rows, rows]
    out[:, :, 1] = mats[:, cols, cols]
    out[:, :, 2] = 2.0 * mats[:, rows, cols]
    return out


def build_slice(norm: NormalizedSdp, factor: CholFactor, with_cost_row: bool = False) -> AffineSlice:
    """Express the constraints in the congruence basis of ``factor``.

    With X_prev = U.T U, the matrices become A~ = U A U.T (same for the
    cost), and right-hand sides are their traces, which makes identity
    blocks feasible by construction.
    """
    n = norm.order
    U = factor.upper
    transformed = np.einsum("ij,kjl,ml->kim", U, norm.A, U)
    cost_mat = sym(U @ norm.C @ U.T)
    jac = _adjoint_rows(transformed, n)
    rhs = np.einsum("kii->k", transformed)
    cost_rows = _adjoint_rows(cost_mat[None], n)[0]
    cost_trace = float(np.trace(cost_mat))
    if with_cost_row:
        jac = np.concatenate([jac, cost_rows[None]], axis=0)
        rhs = np.concatenate([rhs, [cost_trace]])
    return AffineSlice(order=n, jacobian=jac, rhs=rhs, cost=cost_rows,
                       cost_trace=cost_trace, has_cost_row=with_cost_row)


def slice_residual(slc: AffineSlice, coords: np.ndarray) -> float:
    if slc.nrows == 0:
        return 0.0
    vals = np.einsum("rpa,pa->r", slc.jacobian, coords)
    return float(np.abs(vals - slc.rhs).max())


def newton_kkt_solve(hess_blocks: np.ndarray, jacobian: np.ndarray,
                     gradient: np.ndarray, refine: int = 2,
                     ) -> tuple[np.ndarray, np.ndarray, float]:
    """Solve the equality-constrained Newton system.

    Blocks must already be positive definite (the barrier Hessian is
    negated by the caller).  Returns the step, the row duals, and the
    squared decrement step @ H @ step.

    ``refine`` rounds of iterative refinement reuse the factorizations
    to knock the KKT residual back toward rounding level; near the cone
    boundary the raw solve can lose enough digits that the step stops
    being a descent direction.
    """
    p = hess_blocks.shape[0]
    r = jacobian.shape[0]
    rhs = np.concatenate([jacobian.transpose(1, 2, 0), gradient[:, :, None]], axis=2)
    try:
        solved = np.linalg.solve(hess_blocks, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularKkt(f"singular 3x3 Hessian block: {exc}") from None
    hinv_jt = solved[:, :, :r]
    hinv_g = solved[:, :, r]
    if r:
        j2 = jacobian.reshape(r, 3 * p)
        schur = j2 @ hinv_jt.reshape(3 * p, r)
        try:
            fac = cho_factor(schur, lower=True)
        except np.linalg.LinAlgError as exc:
            raise SingularKkt(f"Schur complement not positive definite: {exc}") from None
        nu = cho_solve(fac, -(j2 @ hinv_g.reshape(3 * p)))
        step = -(hinv_g + np.einsum("par,r->pa", hinv_jt, nu))
        for _ in range(refine):
            r1 = (np.einsum("pab,pb->pa", hess_blocks, step)
                  + np.einsum("rpa,r->pa", jacobian, nu) + gradient)
            r2 = np.einsum("rpa,pa->r", jacobian, step)
            hinv_r1 = np.linalg.solve(hess_blocks, r1[:, :, None])[:, :, 0]
            w = cho_solve(fac, r2 - j2 @ hinv_r1.reshape(3 * p))
            step -= hinv_r1 + np.einsum("par,r->pa", hinv_jt, w)
            nu += w
    else:
        nu = np.zeros(0)
        step = -hinv_g
        for _ in range(refine):
            r1 = np.einsum("pab,pb->pa", hess_blocks, step) + gradient
            step -= np.linalg.solve(hess_blocks, r1[:, :, None])[:, :, 0]
    lam2 = float(np.einsum("pa,pab,pb->", step, hess_blocks, step))
    return step, nu, max(lam2, 0.0)


def _damped_newton(coords: np.ndarray, order: int, jacobian: np.ndarray,
                   value: Callable[[np.ndarray], float],
                   gradient: Callable[[np.ndarray], np.ndarray],
                   hessian: Callable[[np.ndarray], np.ndarray],
                   interior: Callable[[np.ndarray], bool],
                   ls: LineSearchConfig, tol_lambda: float, max_iter: int,
                   stall_accept: float | None = None, stall_patience: int = 3,
                   ) -> tuple[np.ndarray, np.ndarray, float, float, int, int]:
    """Feasible-start damped Newton until the decrement falls below tol.

    The returned duals come from the KKT solve at the final iterate, so
    they certify the point that is returned, not the one before it.

    Near the cone boundary the Hessian condition number can exceed what
    double precision resolves, and the objective stops moving even
    though the computed decrement sits above ``tol_lambda``.  When
    ``stall_accept`` is set and the decrement is already below it, such
    a stall returns the current iterate with its true decrement instead
    of raising; a stall at a larger decrement still raises.
    """
    lam0 = None
    backtracks = 0
    plateau = 0
    for it in range(max_iter):
        g = gradient(coords)
        H = hessian(coords)
        step, nu, lam2 = newton_kkt_solve(H, jacobian, g)
        lam = float(np.sqrt(lam2))
        if lam0 is None:
            lam0 = lam
        if lam <= tol_lambda:
            return coords, nu, lam, lam0, it, backtracks
        acceptable = stall_accept is not None and lam <= stall_accept
        if plateau >= stall_patience:
            if acceptable:
                return coords, nu, lam, lam0, it, backtracks
            raise MaxIterationsExceeded(
                f"objective stalled at floating-point resolution with decrement {lam:.3e}")
        f0 = value(coords)
        slope = float(np.tensordot(g, step))
        t = 1.0
        accepted = False
        fc = f0
        for _ in range(ls.max_backtracks):
            cand = coords + t * step
            if interior(cand):
                fc = value(cand)
                if fc <= f0 + ls.alpha * t * slope:
                    coords = cand
                    accepted = True
                    break
            t *= ls.beta
            backtracks += 1
        if not accepted:
            if acceptable:
                return coords, nu, lam, lam0, it + 1, backtracks
            raise MaxIterationsExceeded(
                f"line search exhausted {ls.max_backtracks} backtracks at decrement {lam:.3e}")
        if f0 - fc <= 1e-13 * max(1.0, abs(f0)):
            plateau += 1
        else:
            plateau = 0
    raise MaxIterationsExceeded(f"no convergence within {max_iter} Newton iterations")


def centering_solve(slc: AffineSlice, kind: Cone, ls: LineSearchConfig,
                    tol_lambda: float = 1e-8, max_iter: int = 200,
                    start: BlockSet | None = None,
                    stall_accept: float | None = None) -> NewtonState:
    """Minimize -phi over the slice, starting from identity blocks.

    When the slice carries a cost row, ``tau`` is the cost-row dual
    rescaled by -1/(N-1): near the central path the gradient of phi at
    identity blocks is (N-1) times the adjoint of the identity, so the
    rescaled dual estimates the central-path parameter t (with t
    approximately -tau > 0 below the analytic center).

    ``stall_accept`` (optional) keeps a floating-point-stalled iterate
    whose decrement is below it; descent is monotone either way, so the
    caller's exit test sees the true decrement.
    """
    n = slc.order
    blocks0 = start if start is not None else identity_blocks(n)

    def value(m: np.ndarray) -> float:
        return -phi(BlockSet(n, m), kind)

    def gradient(m: np.ndarray) -> np.ndarray:
        return -phi_gradient(BlockSet(n, m), kind)

    def hessian(m: np.ndarray) -> np.ndarray:
        return -phi_hessian(BlockSet(n, m), kind)

    def interior(m: np.ndarray) -> bool:
        return in_interior(BlockSet(n, m), kind)

    coords, nu, lam, lam0, iters, bts = _damped_newton(
        blocks0.coords.copy(), n, slc.jacobian, value, gradient, hessian,
        interior, ls, tol_lambda, max_iter, stall_accept=stall_accept)
    blocks = BlockSet(n, coords)
    tau = float(-nu[-1] / (n - 1)) if slc.has_cost_row and nu.size else None
    return NewtonState(blocks=blocks, value=value(coords), decrement=lam,
                       decrement0=lam0, nu=nu, tau=tau, iterations=iters,
                       backtracks=bts, residual=slice_residual(slc, coords))


def decrease_solve(slc: AffineSlice, kind: Cone, ls: LineSearchConfig,
                   gap_tol: float, tol_lambda: float = 1e-6,
                   mu_factor: float = 10.0, cost_floor: float = -1e9,
                   max_iter_per_mu: int = 200, max_mu_steps: int = 60,
                   stall_accept: float = 0.25,
                   stop_cost: float | None = None) -> NewtonState:
    """Minimize the cost over the cone slice by path following.

    Runs the barrier sequence mu * cost - phi with mu multiplied by
    ``mu_factor`` until the barrier gap bound nu_barrier / mu drops to
    ``gap_tol``; nu_barrier is 2 per block.  Raises :class:`Unbounded`
    when the cost falls below ``cost_floor``.

    ``stop_cost`` (optional) ends the schedule early once the iterate's
    cost reaches it.  A caller that only needs a bounded amount of
    descent can thereby avoid driving the iterate all the way to the
    slice boundary, whose near-singular geometry would poison the
    conditioning of any basis built from the result.

    Late in the schedule the centers hug the cone boundary and Newton
    can stall on conditioning before reaching ``tol_lambda``; a stalled
    step with decrement below ``stall_accept`` is kept (the point is
    feasible and interior regardless) and the true decrement is
    reported in the returned state.
    """
    n = slc.order
    npairs = n * (n - 1) // 2
    nu_barrier = 2.0 * npairs
    mu = nu_barrier / max(abs(slc.cost_trace), 1.0)
    coords = identity_blocks(n).coords.copy()

    def interior(m: np.ndarray) -> bool:
        return in_interior(BlockSet(n, m), kind)

    lam0_first = None
    total_iters = 0
    total_bts = 0
    for _ in range(max_mu_steps):
        def value(m: np.ndarray, mu=mu) -> float:
            # every point this sees is feasible and interior, so a cost
            # below the floor proves the subproblem unbounded
            cost_here = float(np.tensordot(slc.cost, m))
            if cost_here < cost_floor:
                raise Unbounded(f"cost {cost_here:.6e} fell below the floor {cost_floor:.6e}")
            return mu * cost_here - phi(BlockSet(n, m), kind)

        def gradient(m: np.ndarray, mu=mu) -> np.ndarray:
            return mu * slc.cost - phi_gradient(BlockSet(n, m), kind)

        def hessian(m: np.ndarray) -> np.ndarray:
            return -phi_hessian(BlockSet(n, m), kind)

        coords, nu, lam, lam0, iters, bts = _damped_newton(
            coords, n, slc.jacobian, value, gradient, hessian, interior,
            ls, tol_lambda, max_iter_per_mu, stall_accept=stall_accept)
        total_iters += iters
        total_bts += bts
        if lam0_first is None:
            lam0_first = lam0
        cost = float(np.tensordot(slc.cost, coords))
        if (stop_cost is not None and cost <= stop_cost) or nu_barrier / mu <= gap_tol:
            blocks = BlockSet(n, coords)
            return NewtonState(blocks=blocks, value=cost, decrement=lam,
                               decrement0=lam0_first, nu=nu, tau=None,
                               iterations=total_iters, backtracks=total_bts,
                               residual=slice_residual(slc, coords))
        mu *= mu_factor
    raise MaxIterationsExceeded(f"barrier gap did not reach {gap_tol:.3e} in {max_mu_steps} mu steps")


def extract_iterate(blocks: BlockSet, factor: CholFactor) -> np.ndarray:
    """Map block coordinates back to the original variable: U.T Psi(m) U."""
    U = factor.upper
    return sym(U.T @ psi_assemble(blocks) @ U)
