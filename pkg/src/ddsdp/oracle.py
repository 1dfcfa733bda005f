"""Reference computations on the normalized problem, kept deliberately
independent of the block-coordinate machinery.

Everything here works in plain svec coordinates with a dense Hessian
(symmetric Kronecker product), so it scales only to small orders; the
cap keeps it honest as test infrastructure rather than a solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .problem import NormalizedSdp, svec, unsvec
from .symmat import sym

MAX_ORACLE_ORDER = 30


class NotConverged(Exception):
    pass


@dataclass(frozen=True)
class OraclePoint:
    """A point on (or at the tip of) the central path.

    ``duals`` are the constraint multipliers gamma with
    X^-1 = t (C - sum_i gamma_i A_i).  For analytic-center solves ``tau``
    is the cost-row dual with the sign convention t = -tau below the
    center, and ``t`` is |tau|.
    """

    t: float
    X: np.ndarray
    duals: np.ndarray
    cost: float
    decrement: float
    decrement0: float
    tau: float | None = None


def _check_order(norm: NormalizedSdp) -> None:
    if norm.order > MAX_ORACLE_ORDER:
        raise ValueError(f"oracle is capped at order {MAX_ORACLE_ORDER}, got {norm.order}")


def _logdet_pd(X: np.ndarray) -> tuple[np.ndarray, float] | None:
    """(inverse, logdet) when X is positive definite, else None."""
    try:
        L = np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        return None
    Linv = np.linalg.inv(L)
    Xinv = sym(Linv.T @ Linv)
    eye2 = 2.0 * np.eye(X.shape[0])
    for _ in range(2):
        # polish the inverse; the Newton decrement is computed from the
        # gradient residual and stalls above tol on the raw triangular
        # inverse's forward error
        Xinv = sym(Xinv @ (eye2 - X @ Xinv))
    return Xinv, float(2.0 * np.log(np.diag(L)).sum())


def logdet_hessian_matrix(S: np.ndarray) -> np.ndarray:
    """Quadratic form Tr(S U S V) as a dense matrix in svec coordinates."""
    n = S.shape[0]
    rows, cols = np.triu_indices(n)
    w = np.where(rows == cols, 1.0, np.sqrt(2.0))
    block = S[np.ix_(rows, rows)] * S[np.ix_(cols, cols)] + S[np.ix_(rows, cols)] * S[np.ix_(cols, rows)]
    return 0.5 * np.outer(w, w) * block


def _project_feasible(x0: np.ndarray, J: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Exact feasibility restoration; valid because J has orthonormal rows."""
    if J.shape[0] == 0:
        return x0
    return x0 + J.T @ (rhs - J @ x0)


def _constrained_newton(norm: NormalizedSdp, J: np.ndarray, rhs: np.ndarray,
                        cost_vec: np.ndarray | None, inv_t: float,
                        X_start: np.ndarray, tol: float, max_iter: int,
                        ) -> tuple[np.ndarray, np.ndarray, float, float]:
    """Minimize cost_vec @ x - inv_t * logdet(X) over {J x = rhs}.

    Returns the final svec point, row duals, and the exit/entry
    decrements.  ``cost_vec`` may be None for a pure log-det problem.
    """
    n = norm.order
    x = _project_feasible(svec(sym(X_start)), J, rhs)
    state = _logdet_pd(unsvec(x, n))
    if state is None:
        raise NotConverged("starting point is not positive definite after feasibility projection")
    lam0 = None
    for _ in range(max_iter):
        Xinv, logdet = state
        g = -inv_t * svec(Xinv)
        if cost_vec is not None:
            g = g + cost_vec
        H = inv_t * logdet_hessian_matrix(Xinv)
        try:
            fac = cho_factor(H, lower=True)
        except np.linalg.LinAlgError as exc:
            raise NotConverged(f"oracle Hessian lost definiteness: {exc}") from None
        if J.shape[0]:
            hinv_jt = cho_solve(fac, J.T)
            schur = J @ hinv_jt
            nu = np.linalg.solve(schur, -(J @ cho_solve(fac, g)))
            step = -cho_solve(fac, g + J.T @ nu)
            for _ in range(2):
                # refinement against the ill-conditioning of X^-1 at
                # large t; reuses the factorizations
                r1 = H @ step + J.T @ nu + g
                r2 = J @ step
                hinv_r1 = cho_solve(fac, r1)
                w = np.linalg.solve(schur, r2 - J @ hinv_r1)
                step -= hinv_r1 + hinv_jt @ w
                nu += w
        else:
            nu = np.zeros(0)
            step = -cho_solve(fac, g)
            for _ in range(2):
                step -= cho_solve(fac, H @ step + g)
        lam = float(np.sqrt(max(step @ (H @ step), 0.0)))
        if lam0 is None:
            lam0 = lam
        if lam <= tol:
            return x, nu, lam, lam0
        f0 = (cost_vec @ x if cost_vec is not None else 0.0) - inv_t * logdet
        slope = float(g @ step)
        t_step = 1.0
        accepted = False
        for _ in range(80):
            cand = x + t_step * step
            cand_state = _logdet_pd(unsvec(cand, n))
            if cand_state is not None:
                f_cand = (cost_vec @ cand if cost_vec is not None else 0.0) - inv_t * cand_state[1]
                if f_cand <= f0 + 0.25 * t_step * slope:
                    x, state = cand, cand_state
                    accepted = True
                    break
            t_step *= 0.5
        if not accepted:
            raise NotConverged(f"oracle line search stalled at decrement {lam:.3e}")
    raise NotConverged(f"oracle Newton did not reach tol {tol:.1e} in {max_iter} iterations")


def central_path_point(norm: NormalizedSdp, t: float, X_start: np.ndarray,
                       tol: float = 1e-9, max_iter: int = 500) -> OraclePoint:
    """The barrier minimizer min Tr(C X) - (1/t) logdet X on the slice."""
    _check_order(norm)
    if t <= 0:
        raise ValueError(f"t must be positive, got {t}")
    n, m = norm.order, norm.num_constraints
    J = np.stack([svec(norm.A[i]) for i in range(m)], axis=0) if m else np.zeros((0, n * (n + 1) // 2))
    x, nu, lam, lam0 = _constrained_newton(norm, J, norm.b, svec(norm.C), 1.0 / t,
                                           X_start, tol, max_iter)
    X = unsvec(x, n)
    return OraclePoint(t=t, X=X, duals=-nu, cost=float(np.tensordot(norm.C, X)),
                       decrement=lam, decrement0=lam0)


def analytic_center(norm: NormalizedSdp, cost_level: float | None, X_start: np.ndarray,
                    tol: float = 1e-9, max_iter: int = 500) -> OraclePoint:
    """Maximize logdet on the slice, optionally with the cost pinned.

    With the cost row present the dual tau satisfies |tau| = t of the
    central-path point through the same cost level.
    """
    _check_order(norm)
    n, m = norm.order, norm.num_constraints
    rows = [svec(norm.A[i]) for i in range(m)]
    rhs = list(norm.b)
    if cost_level is not None:
        rows.append(svec(norm.C))
        rhs.append(cost_level)
    J = np.stack(rows, axis=0) if rows else np.zeros((0, n * (n + 1) // 2))
    x, nu, lam, lam0 = _constrained_newton(norm, J, np.array(rhs), None, 1.0,
                                           X_start, tol, max_iter)
    X = unsvec(x, n)
    tau = float(-nu[-1]) if cost_level is not None else None
    duals = -nu[:m] if cost_level is not None else -nu
    return OraclePoint(t=abs(tau) if tau is not None else 0.0, X=X, duals=duals,
                       cost=float(np.tensordot(norm.C, X)), decrement=lam,
                       decrement0=lam0, tau=tau)


def reference_solve(norm: NormalizedSdp, eps: float, X_start: np.ndarray,
                    t_start: float | None = None, t_factor: float = 10.0) -> OraclePoint:
    """Follow the central path until the duality bound N/t reaches eps.

    The returned point's normalized cost is within eps of the optimum.
    A zero-scale cost short-circuits to the analytic center (the
    objective is constant on the feasible set).
    """
    _check_order(norm)
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if norm.cost_scale == 0.0:
        return analytic_center(norm, None, X_start)
    n = norm.order
    t = t_start if t_start is not None else float(n)
    point = central_path_point(norm, t, X_start)
    while n / t > eps:
        t *= t_factor
        point = central_path_point(norm, t, point.X)
    return point
