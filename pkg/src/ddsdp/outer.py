"""Outer loop: alternate cost-decrease and recentering subproblems,
turn recentering duals into certified bounds on the duality gap.

Certificates come from the projection of the inverse iterate onto the
cost direction: on the central path t = Tr(C X_t^{-1}) exactly (the
constraint directions are trace-orthogonal to C), and near the path the
deviation is controlled by the centering quality, giving an interval
[t_lo, t_hi] for the true path parameter and a duality gap bound
N / t_lo.

Units: the certified gap and the termination threshold ``eps_gap`` are
in original cost units; the normalized bound N / t_lo is multiplied by
the cost scale recorded during normalization.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .cones import Cone
from .inner import (LineSearchConfig, MaxIterationsExceeded, SingularKkt, Unbounded,
                    build_slice, centering_solve, decrease_solve, extract_iterate)
from .problem import NormalizedSdp, recover_objective
from .symmat import NotPositiveDefinite, cholesky, inv_from_factor, sym


class InfeasibleStart(Exception):
    pass


class CenteringBudgetExceeded(Exception):
    pass


class SubproblemFailure(Exception):
    pass


class NonPositiveT(Exception):
    pass


@dataclass(frozen=True)
class SolverConfig:
    cone: Cone = Cone.SDD
    decrease_steps: int = 5
    eps_gap: float = 1e-3
    eps_center: float = 1e-2
    line_search: LineSearchConfig = field(default_factory=LineSearchConfig)
    max_phases: int = 200
    tol_lambda: float | None = None
    decrease_gap_tol: float | None = None
    mu_factor: float = 10.0
    cost_floor: float = -1e9
    max_center_steps: int | None = None
    adapt_eps_center: bool = True
    keep_exit_iterates: bool = False

    def __post_init__(self):
        if self.decrease_steps < 1:
            raise ValueError(f"decrease_steps must be at least 1, got {self.decrease_steps}")
        if self.eps_gap <= 0 or self.eps_center <= 0:
            raise ValueError("eps_gap and eps_center must be positive")


@dataclass(frozen=True)
class TheoryConstants:
    """Convergence constants for a given order, cone and line search.

    ``xi`` is the guaranteed per-step increase of (N-1) log det X while
    recentering is far from done; ``center_budget`` bounds the number of
    recentering steps per phase; ``chi`` is the guaranteed geometric
    growth factor of the path parameter per phase and ``kappa`` the
    resulting phase bound.  ``eps_center_star`` is the centering
    tolerance below which the guaranteed-decrease point is reachable
    from the computed (rather than exact) center.
    """

    order: int
    cone: Cone
    eta: float
    xi: float
    phi: float
    phi_prime: float
    eps_center_star: float
    theta_hat: float
    chi: float
    t0: float | None
    kappa: int | None
    logdet_span: float
    center_budget: int


@dataclass
class InnerRecord:
    """One subproblem solve; the flat trace rows."""

    phase: int
    kind: str
    inner_iter: int
    cost: float
    lambda0: float | None
    tau: float | None
    t_lo: float | None
    t_hi: float | None
    gap: float | None
    millis: float
    newton_iters: int = 0
    logdet: float = 0.0


@dataclass
class PhaseTrace:
    phase: int
    kind: str
    inner_count: int
    cost_before: float
    cost_after: float
    lambda0: float | None
    tau: float | None
    t_lo: float | None
    t_hi: float | None
    gap: float | None
    millis: float


@dataclass
class CenteringExit:
    phase: int
    cost_level: float
    X: np.ndarray
    tau: float
    ghat: float
    t_lo: float
    t_hi: float
    theta_sample: float


@dataclass
class CenteringResult:
    X: np.ndarray
    tau: float | None
    ghat: float
    t_lo: float | None
    t_hi: float | None
    theta_sample: float
    records: list[InnerRecord]
    steps: int
    lambda0_exit: float
    cost_level: float


@dataclass
class SolveReport:
    name: str
    cone: Cone
    status: str
    objective: float
    gap: float | None
    gap_normalized: float | None
    t_lo: float | None
    t_hi: float | None
    phases: list[PhaseTrace]
    records: list[InnerRecord]
    constants: TheoryConstants
    X: np.ndarray
    eps_gap: float
    eps_center_final: float
    wall_ms: float
    message: str = ""
    centering_exits: list[CenteringExit] | None = None


def theory_constants(n: int, cone: Cone, ls: LineSearchConfig, eps_center: float,
                     eps_gap_normalized: float | None = None, theta_hat: float = 0.0,
                     t0: float | None = None, logdet_span: float = 1.0) -> TheoryConstants:
    """Evaluate the convergence constants; purely arithmetic."""
    eta = ls.eta
    root = math.sqrt(n - 1)
    xi = (ls.alpha * ls.beta / root) * eta * eta / (root + eta)
    phi_prime = 2.0 / (n + 1) if cone is Cone.DD else 1.0
    phi = 0.81 * phi_prime
    ratio = (math.sqrt(phi_prime) - math.sqrt(phi)) / (math.sqrt(n) + math.sqrt(phi_prime))
    eps_center_star = -math.log1p(-(ratio ** 3))
    growth = n * math.sqrt(1.0 + theta_hat)
    chi = growth / (growth - math.sqrt(phi))
    kappa = None
    if eps_gap_normalized and t0 and t0 > 0:
        kappa = max(0, math.ceil((math.log(n / eps_gap_normalized) - math.log(t0)) / math.log(chi)))
    span = max(1.0, logdet_span)
    far_steps = math.ceil(max(0.0, span - eps_center) / xi)
    quad_steps = math.ceil(max(0.0, (2.0 * math.log(eta) - math.log(eps_center))
                               / (math.log(n - 1) - math.log(n - 1 - ls.alpha))))
    return TheoryConstants(order=n, cone=cone, eta=eta, xi=xi, phi=phi,
                           phi_prime=phi_prime, eps_center_star=eps_center_star,
                           theta_hat=theta_hat, chi=chi, t0=t0, kappa=kappa,
                           logdet_span=span, center_budget=far_steps + quad_steps)


def t_bounds(tau: float, eps_center: float, X: np.ndarray,
             ls: LineSearchConfig) -> tuple[float, float]:
    """Interval around -tau containing the central-path parameter.

    The width combines the eps_center suboptimality of the recentered
    iterate with the norm of its inverse; soundness needs eps_center to
    bound the actual centering gap of X.
    """
    inv_norm = float(np.linalg.norm(inv_from_factor(cholesky(X))))
    width = ((1.0 + 1.0 / (ls.alpha * ls.beta)) * eps_center
             + math.sqrt(2.0 * eps_center)) * inv_norm
    return -tau - width, -tau + width


def certified_gap(t_lo: float, n: int) -> float:
    """Duality gap bound N / t_lo in normalized cost units."""
    if t_lo <= 0:
        raise NonPositiveT(f"no certificate from t_lo = {t_lo:.6e}")
    return n / t_lo


def hat_x(norm: NormalizedSdp, X_center: np.ndarray, phi: float) -> np.ndarray:
    """The guaranteed-decrease point: a sphere step against the cost.

    In the congruence basis of X_center the point is
    I - sqrt(phi) * Q / ||Q||_F with Q the transformed cost, so it stays
    feasible, lands inside the cone whenever the sphere of radius
    sqrt(phi) does, and lowers the normalized cost by exactly
    sqrt(phi) / ||Q||_F.
    """
    factor = cholesky(X_center)
    # Q = U^-T C U^-1, the image of the cost under the adjoint of the
    # iterate map X = U.T Y U.  Pairing it with the transformed cost
    # gives exactly ||C||_F^2, and it is trace-orthogonal to the
    # transformed constraints because C is orthogonal to the A_i.
    U = factor.upper
    W = solve_triangular(U, norm.C, trans="T", lower=False)
    Q = sym(solve_triangular(U, W.T, trans="T", lower=False).T)
    qnorm = float(np.linalg.norm(Q))
    if qnorm == 0.0:
        return X_center.copy()
    Yhat = np.eye(norm.order) - math.sqrt(phi) * Q / qnorm
    return sym(U.T @ Yhat @ U)


def _tau_certificate(norm: NormalizedSdp, Xinv: np.ndarray) -> float:
    """-Tr(C X^-1): exact -t on the central path, first-order accurate off it."""
    return float(-np.tensordot(norm.C, Xinv))


def _feasibility_error(norm: NormalizedSdp, X: np.ndarray) -> float:
    vals = np.tensordot(norm.A, X, axes=([1, 2], [0, 1]))
    return float(np.abs(vals - norm.b).max()) if vals.size else 0.0


def centering_phase(norm: NormalizedSdp, X: np.ndarray, cfg: SolverConfig,
                    eps_center: float | None = None, phase: int = 0,
                    best_logdet: float | None = None) -> CenteringResult:
    """Recenter X at its current cost level until the gap surrogate
    (N - 1 - alpha) * lambda0^2 drops below eps_center.

    lambda0 is the Newton decrement measured at identity blocks of each
    fresh congruence basis, so the exit test certifies the point that
    the previous step produced; the returned X is the last, fully
    resolved iterate.
    """
    n = norm.order
    ls = cfg.line_search
    eps_c = eps_center if eps_center is not None else cfg.eps_center
    surrogate_scale = n - 1 - ls.alpha
    lam_exit = min(ls.eta / math.sqrt(n - 1), math.sqrt(eps_c / surrogate_scale))
    tol_lambda = cfg.tol_lambda if cfg.tol_lambda is not None else max(1e-8, 1e-2 * lam_exit)
    with_cost = norm.cost_scale > 0.0

    logdet_entry = float(np.linalg.slogdet(X)[1])
    span_est = max(1.0, (n - 1) * (max(best_logdet or logdet_entry, logdet_entry) - logdet_entry) + 1.0)
    budget = cfg.max_center_steps
    if budget is None:
        budget = theory_constants(n, cfg.cone, ls, eps_c, logdet_span=span_est).center_budget + 30

    records: list[InnerRecord] = []
    for step in range(1, budget + 1):
        started = time.perf_counter()
        factor = cholesky(X)
        slc = build_slice(norm, factor, with_cost_row=with_cost)
        state = centering_solve(slc, cfg.cone, ls, tol_lambda=tol_lambda,
                                stall_accept=lam_exit)
        X = extract_iterate(state.blocks, factor)
        lam0 = state.decrement0
        ghat = surrogate_scale * lam0 * lam0
        done = lam0 <= lam_exit
        tau_cert = t_lo = t_hi = None
        theta_sample = 0.0
        if done and with_cost:
            exit_factor = cholesky(X)
            Xinv = inv_from_factor(exit_factor)
            tau_cert = _tau_certificate(norm, Xinv)
            t_lo, t_hi = t_bounds(tau_cert, min(ghat, eps_c), X, ls)
            t_est = -tau_cert
            if t_est > 0:
                theta_sample = max(0.0, float(np.linalg.norm(Xinv)) ** 2 / t_est ** 2 - 1.0)
        millis = (time.perf_counter() - started) * 1e3
        records.append(InnerRecord(
            phase=phase, kind="centering", inner_iter=step,
            cost=recover_objective(norm, X), lambda0=lam0, tau=state.tau,
            t_lo=t_lo, t_hi=t_hi,
            gap=None, millis=millis, newton_iters=state.iterations,
            logdet=float(np.linalg.slogdet(X)[1])))
        if done:
            return CenteringResult(X=X, tau=tau_cert, ghat=ghat, t_lo=t_lo, t_hi=t_hi,
                                   theta_sample=theta_sample, records=records, steps=step,
                                   lambda0_exit=lam0,
                                   cost_level=float(np.tensordot(norm.C, X)))
    raise CenteringBudgetExceeded(
        f"phase {phase}: no centering exit within {budget} steps (eps_center={eps_c:.3e})")


def _tighten_eps_center(eps_center: float, theta_hat: float, ls: LineSearchConfig) -> float:
    """Largest eps_center whose certificate width stays safely below t.

    Solves (1 + 1/(alpha beta)) e + sqrt(2 e) = w for the target width
    w = 0.25 / sqrt(1 + theta_hat), since on the path ||X^-1|| grows
    like t sqrt(1 + theta): any wider and t_lo could never go positive.
    """
    a = 1.0 + 1.0 / (ls.alpha * ls.beta)
    w = 0.25 / math.sqrt(1.0 + theta_hat)
    u = (-1.0 + math.sqrt(1.0 + 2.0 * a * w)) / a
    return min(eps_center, u * u / 2.0)


def solve(norm: NormalizedSdp, X0: np.ndarray, cfg: SolverConfig | None = None) -> SolveReport:
    """Run decrease/recenter phases until the certified duality gap (in
    original cost units) reaches ``cfg.eps_gap``.
    """
    cfg = cfg or SolverConfig()
    n = norm.order
    ls = cfg.line_search
    start_wall = time.perf_counter()

    feas = _feasibility_error(norm, X0)
    if feas > 1e-8 * max(1.0, float(np.abs(norm.b).max())):
        raise InfeasibleStart(f"constraint residual {feas:.3e} at the starting point")
    try:
        cholesky(X0)
    except NotPositiveDefinite as exc:
        raise InfeasibleStart(f"starting point is not positive definite: {exc}") from None

    records: list[InnerRecord] = []
    phases: list[PhaseTrace] = []
    exits: list[CenteringExit] = [] if cfg.keep_exit_iterates else None

    def finish(status, X, gap, gap_n, t_lo, t_hi, eps_c, theta_hat, t0, span, message=""):
        constants = theory_constants(
            n, cfg.cone, ls, eps_c,
            eps_gap_normalized=(cfg.eps_gap / norm.cost_scale if norm.cost_scale else None),
            theta_hat=theta_hat, t0=t0, logdet_span=span)
        return SolveReport(
            name=norm.name, cone=cfg.cone, status=status,
            objective=recover_objective(norm, X), gap=gap, gap_normalized=gap_n,
            t_lo=t_lo, t_hi=t_hi, phases=phases, records=records,
            constants=constants, X=X, eps_gap=cfg.eps_gap, eps_center_final=eps_c,
            wall_ms=(time.perf_counter() - start_wall) * 1e3, message=message,
            centering_exits=exits)

    if norm.cost_scale == 0.0:
        result = centering_phase(norm, X0, cfg, phase=1)
        records.extend(result.records)
        phases.append(PhaseTrace(1, "centering", result.steps,
                                 recover_objective(norm, X0), recover_objective(norm, result.X),
                                 result.lambda0_exit, None, None, None, 0.0, sum(r.millis for r in result.records)))
        return finish("gap_reached", result.X, 0.0, 0.0, None, None,
                      cfg.eps_center, 0.0, None, 1.0,
                      "cost is a combination of constraints; any feasible point is optimal")

    X = X0
    eps_c = cfg.eps_center
    theta_hat = 0.0
    t0 = None
    t_est = None
    best_logdet = float(np.linalg.slogdet(X)[1])
    span_seen = 1.0
    best = {"gap": None, "gap_n": None, "t_lo": None, "t_hi": None}
    constants0 = theory_constants(n, cfg.cone, ls, eps_c)

    try:
        for phase in range(1, cfg.max_phases + 1):
            # decrease phase: several cost-descent subproblems in fresh bases
            cost_before = recover_objective(norm, X)
            phase_started = time.perf_counter()
            eps_n = cfg.eps_gap / norm.cost_scale
            if cfg.decrease_gap_tol is not None:
                gap_tol = cfg.decrease_gap_tol
            else:
                t_here = t_est
                if not (t_here and t_here > 0):
                    # before the first centering exit, read the parameter
                    # off the iterate itself: t = Tr(C X^-1) on the path
                    t_here = -_tau_certificate(norm, inv_from_factor(cholesky(X)))
                if t_here > 0:
                    gap_tol = 0.1 * math.sqrt(constants0.phi) / (t_here * math.sqrt(1.0 + theta_hat))
                else:
                    gap_tol = 1e-6 * max(1.0, abs(float(np.tensordot(norm.C, X))))
                # never ask a subproblem for more precision than the
                # termination test can use: the landed iterate then sits
                # at least ~eps/4 above the slice optimum, keeping the
                # next basis invertible at double precision
                gap_tol = max(gap_tol, 0.25 * eps_n)
            # only descend as far as certification can use: past the
            # target level the extra depth shows up as a near-singular
            # basis for the next phase, not as a better certificate
            stop_cost = None
            gap_n_ref = best["gap_n"]
            if gap_n_ref is None and t_est and t_est > 0:
                gap_n_ref = n / t_est
            if gap_n_ref is not None:
                stop_cost = float(np.tensordot(norm.C, X)) - max(0.0, gap_n_ref - 0.5 * eps_n)
            for s in range(1, cfg.decrease_steps + 1):
                started = time.perf_counter()
                factor = cholesky(X)
                slc = build_slice(norm, factor, with_cost_row=False)
                state = decrease_solve(slc, cfg.cone, ls, gap_tol=gap_tol,
                                       mu_factor=cfg.mu_factor, cost_floor=cfg.cost_floor,
                                       stop_cost=stop_cost)
                X_new = extract_iterate(state.blocks, factor)
                # never accept a subproblem result that lost ground to
                # rounding; the next basis still makes progress
                if float(np.tensordot(norm.C, X_new)) <= float(np.tensordot(norm.C, X)):
                    X = X_new
                records.append(InnerRecord(
                    phase=phase, kind="decrease", inner_iter=s,
                    cost=recover_objective(norm, X), lambda0=None, tau=None,
                    t_lo=None, t_hi=None, gap=None,
                    millis=(time.perf_counter() - started) * 1e3,
                    newton_iters=state.iterations,
                    logdet=float(np.linalg.slogdet(X)[1])))
            phases.append(PhaseTrace(phase, "decrease", cfg.decrease_steps, cost_before,
                                     recover_objective(norm, X), None, None, None, None, None,
                                     (time.perf_counter() - phase_started) * 1e3))

            # centering phase at the reached cost level
            phase_started = time.perf_counter()
            cost_mid = recover_objective(norm, X)
            result = centering_phase(norm, X, cfg, eps_center=eps_c, phase=phase,
                                     best_logdet=best_logdet)
            X = result.X
            records.extend(result.records)
            best_logdet = max(best_logdet, records[-1].logdet)
            span_seen = max(span_seen, (n - 1) * (records[-1].logdet - records[-len(result.records)].logdet))
            theta_hat = max(theta_hat, result.theta_sample)

            gap = gap_n = None
            if result.t_lo is not None and result.t_lo > 0:
                gap_n = certified_gap(result.t_lo, n)
                gap = norm.cost_scale * gap_n
                if t0 is None and result.tau is not None and -result.tau > 0:
                    t0 = -result.tau
                if best["t_lo"] is None or result.t_lo > best["t_lo"]:
                    best = {"gap": gap, "gap_n": gap_n, "t_lo": result.t_lo, "t_hi": result.t_hi}
            if result.tau is not None and -result.tau > 0:
                t_est = -result.tau
            phases.append(PhaseTrace(phase, "centering", result.steps, cost_mid,
                                     recover_objective(norm, X), result.lambda0_exit,
                                     result.tau, result.t_lo, result.t_hi, gap,
                                     (time.perf_counter() - phase_started) * 1e3))
            if records and result.records:
                last = records[-1]
                last.t_lo, last.t_hi, last.gap = result.t_lo, result.t_hi, gap
            if exits is not None and result.tau is not None:
                exits.append(CenteringExit(phase=phase, cost_level=result.cost_level,
                                           X=X.copy(), tau=result.tau, ghat=result.ghat,
                                           t_lo=result.t_lo, t_hi=result.t_hi,
                                           theta_sample=result.theta_sample))

            if gap is not None and gap <= cfg.eps_gap:
                return finish("gap_reached", X, gap, gap_n, result.t_lo, result.t_hi,
                              eps_c, theta_hat, t0, span_seen)
            if cfg.adapt_eps_center:
                tightened = _tighten_eps_center(cfg.eps_center, theta_hat, ls)
                if result.t_lo is not None and result.t_lo <= 0:
                    tightened = min(tightened, eps_c * 0.1)
                eps_c = max(min(eps_c, tightened), 1e-13)
    except Unbounded as exc:
        return finish("unbounded", X, *(best[k] for k in ("gap", "gap_n", "t_lo", "t_hi")),
                      eps_c, theta_hat, t0, span_seen, message=str(exc))
    except (SingularKkt, MaxIterationsExceeded, NotPositiveDefinite) as exc:
        raise SubproblemFailure(f"{norm.name}: {exc}") from exc

    return finish("phase_budget_exceeded", X, *(best[k] for k in ("gap", "gap_n", "t_lo", "t_hi")),
                  eps_c, theta_hat, t0, span_seen,
                  message=f"no certified gap <= {cfg.eps_gap:.3e} within {cfg.max_phases} phases")
