"""Outer loop: constants, certificates, the guaranteed-decrease point,
and end-to-end solves on hand-checkable instances."""

import math

import numpy as np
import pytest

from ddsdp.cones import Cone, is_dd, is_sdd
from ddsdp.inner import LineSearchConfig
from ddsdp.oracle import analytic_center
from ddsdp.outer import (
    InfeasibleStart,
    NonPositiveT,
    SolverConfig,
    centering_phase,
    certified_gap,
    hat_x,
    solve,
    t_bounds,
    theory_constants,
)
from ddsdp.problem import RawSdp, normalize, phase1_init
from ddsdp.symmat import cholesky

from conftest import bounded_sdp, theta_sdp

LS = LineSearchConfig()


# --- constants and certificates -------------------------------------------


def test_theory_constants_values():
    c = theory_constants(50, Cone.SDD, LS, eps_center=1e-2)
    assert c.eta == pytest.approx(0.125)
    root = math.sqrt(49.0)
    assert c.xi == pytest.approx((0.25 * 0.5 / root) * 0.125 ** 2 / (root + 0.125))
    assert c.phi_prime == 1.0
    assert c.phi == pytest.approx(0.81)
    assert c.eps_center_star == pytest.approx(1.9018e-6, rel=1e-3)
    dd = theory_constants(50, Cone.DD, LS, eps_center=1e-2)
    assert dd.phi_prime == pytest.approx(2.0 / 51.0)
    assert 0.0 < dd.phi < dd.phi_prime <= 1.0


def test_growth_factor_and_phase_bound():
    c = theory_constants(10, Cone.SDD, LS, eps_center=1e-2,
                         eps_gap_normalized=1e-3, theta_hat=0.0, t0=1.0)
    # chi = g / (g - sqrt(phi)) with g = N sqrt(1 + theta)
    assert c.chi == pytest.approx(10.0 / (10.0 - 0.9))
    assert c.chi > 1.0
    assert c.kappa == math.ceil(math.log(10.0 / 1e-3) / math.log(c.chi))
    tighter = theory_constants(10, Cone.SDD, LS, eps_center=1e-2,
                               eps_gap_normalized=1e-6, theta_hat=0.0, t0=1.0)
    assert tighter.kappa > c.kappa
    no_t0 = theory_constants(10, Cone.SDD, LS, eps_center=1e-2)
    assert no_t0.kappa is None
    assert no_t0.center_budget > 0


def test_t_bounds_collapse_without_centering_error():
    t_lo, t_hi = t_bounds(-7.5, 0.0, np.eye(3), LS)
    assert t_lo == t_hi == pytest.approx(7.5)


def test_t_bounds_hand_value():
    X = math.sqrt(2.0) * np.eye(2)  # inverse Frobenius norm exactly 1
    t_lo, t_hi = t_bounds(-100.0, 1e-2, X, LS)
    assert t_lo == pytest.approx(99.768579, abs=1e-5)
    assert t_hi == pytest.approx(100.231421, abs=1e-5)
    assert t_lo <= t_hi


def test_certified_gap_values():
    assert certified_gap(12.0 / 0.05, 12) == pytest.approx(0.05)
    assert certified_gap(50.0, 50) == pytest.approx(1.0)
    with pytest.raises(NonPositiveT):
        certified_gap(0.0, 5)
    with pytest.raises(NonPositiveT):
        certified_gap(-2.0, 5)


# --- guaranteed-decrease point --------------------------------------------


@pytest.mark.parametrize("cone", [Cone.DD, Cone.SDD])
def test_hat_x_properties(cone):
    norm = normalize(bounded_sdp(6, 4, 21))
    X = phase1_init(norm) - 0.15 * norm.C
    phi = theory_constants(6, cone, LS, 1e-2).phi
    Xh = hat_x(norm, X, phi)
    vals = np.tensordot(norm.A, Xh, axes=([1, 2], [0, 1]))
    assert np.abs(vals - norm.b).max() <= 1e-9
    # exact drop sqrt(phi) / ||Q||_F against an independent inverse
    U = cholesky(X).upper
    Uinv = np.linalg.inv(U)
    Q = Uinv.T @ norm.C @ Uinv
    drop = float(np.tensordot(norm.C, X - Xh))
    assert drop == pytest.approx(math.sqrt(phi) / np.linalg.norm(Q), abs=1e-10)
    # the image in the congruence basis sits inside the configured cone
    Y = Uinv.T @ Xh @ Uinv
    Y = 0.5 * (Y + Y.T)
    assert np.linalg.norm(Y - np.eye(6)) == pytest.approx(math.sqrt(phi), abs=1e-9)
    if cone is Cone.DD:
        assert is_dd(Y, 1e-12)
    assert is_sdd(Y, 1e-9)


def test_hat_x_degenerate_cost_is_identity_map():
    raw = RawSdp(name="const", C=2.0 * np.eye(3), A=np.array([np.eye(3)]),
                 b=np.array([3.0]), block_structure=(3,))
    norm = normalize(raw)
    X = np.eye(3)
    assert np.array_equal(hat_x(norm, X, 0.81), X)


# --- centering phase -------------------------------------------------------


def test_centering_phase_is_fixed_point_at_oracle_center():
    norm = normalize(bounded_sdp(6, 4, 21))
    X0 = phase1_init(norm)
    level = float(np.tensordot(norm.C, X0)) - 0.1
    pt = analytic_center(norm, level, X0 - 0.1 * norm.C)
    result = centering_phase(norm, pt.X, SolverConfig())
    assert result.steps == 1
    assert result.lambda0_exit <= 1e-6
    assert result.tau == pytest.approx(pt.tau, rel=1e-4)
    assert result.t_lo <= -pt.tau <= result.t_hi


# --- end-to-end solves ------------------------------------------------------


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(decrease_steps=0)
    with pytest.raises(ValueError):
        SolverConfig(eps_gap=0.0)


def test_solve_min_eigenvalue_instance():
    raw = RawSdp(name="mineig", C=np.diag([1.0, 0.0]), A=np.array([np.eye(2)]),
                 b=np.array([1.0]), block_structure=(2,))
    norm = normalize(raw)
    res = solve(norm, phase1_init(norm), SolverConfig(eps_gap=1e-3))
    assert res.status == "gap_reached"
    assert res.gap <= 1e-3
    # true optimum is 0 (put all mass on the free eigendirection)
    assert res.objective == pytest.approx(0.0, abs=res.gap + 1e-12)
    assert res.objective >= -1e-12
    assert res.gap == pytest.approx(res.gap_normalized * norm.cost_scale)
    assert np.linalg.eigvalsh(res.X)[0] > 0.0


def test_solve_detects_unbounded_objective():
    raw = RawSdp(name="unb", C=np.diag([0.0, -1.0]), A=np.array([np.diag([1.0, 0.0])]),
                 b=np.array([1.0]), block_structure=(2,))
    norm = normalize(raw)
    res = solve(norm, np.eye(2), SolverConfig(eps_gap=1e-3, cost_floor=-1e4))
    assert res.status == "unbounded"
    assert "floor" in res.message


def test_solve_degenerate_cost_returns_feasible_point():
    raw = RawSdp(name="const", C=2.0 * np.eye(3), A=np.array([np.eye(3)]),
                 b=np.array([3.0]), block_structure=(3,))
    norm = normalize(raw)
    res = solve(norm, np.eye(3), SolverConfig())
    assert res.status == "gap_reached"
    assert res.gap == 0.0
    assert res.objective == pytest.approx(6.0, abs=1e-9)


def test_solve_reports_exhausted_phase_budget():
    norm = normalize(bounded_sdp(6, 4, 21))
    res = solve(norm, phase1_init(norm), SolverConfig(eps_gap=1e-9, max_phases=2))
    assert res.status == "phase_budget_exceeded"
    assert res.gap is not None and res.gap > 1e-9
    assert "2 phases" in res.message


def test_solve_rejects_bad_starts():
    norm = normalize(theta_sdp(8, 0.4, 3))
    with pytest.raises(InfeasibleStart):
        solve(norm, np.eye(8), SolverConfig())
    bnorm = normalize(bounded_sdp(6, 4, 21))
    with pytest.raises(InfeasibleStart):
        solve(bnorm, np.eye(6) - 10.0 * bnorm.C, SolverConfig())


def test_solve_is_deterministic():
    norm = normalize(bounded_sdp(6, 4, 22))
    X0 = phase1_init(norm)
    first = solve(norm, X0, SolverConfig(eps_gap=1e-3))
    second = solve(norm, X0, SolverConfig(eps_gap=1e-3))
    assert first.objective == second.objective
    assert first.gap == second.gap
    assert len(first.records) == len(second.records)
    assert np.array_equal(first.X, second.X)


def test_solve_trace_contracts():
    norm = normalize(bounded_sdp(8, 5, 33))
    res = solve(norm, phase1_init(norm), SolverConfig(eps_gap=1e-3))
    assert res.status == "gap_reached"
    kinds = [p.kind for p in res.phases]
    assert kinds == ["decrease", "centering"] * (len(kinds) // 2)
    for p in res.phases:
        if p.kind == "decrease":
            assert p.cost_after <= p.cost_before + 1e-9
        if p.t_lo is not None and p.t_hi is not None:
            assert p.t_lo <= p.t_hi
    # decrease phases never raise the objective across the whole run
    costs = [p.cost_after for p in res.phases if p.kind == "decrease"]
    assert all(b <= a + 1e-9 for a, b in zip(costs, costs[1:]))


def test_dd_needs_more_phases_than_sdd():
    norm = normalize(theta_sdp(12, 0.35, 7))
    X0 = phase1_init(norm)
    runs = {}
    for cone in (Cone.DD, Cone.SDD):
        res = solve(norm, X0, SolverConfig(cone=cone, decrease_steps=1, eps_gap=0.05))
        assert res.status == "gap_reached"
        runs[cone] = res
    # the DD cone is a strictly smaller inner approximation, so the
    # per-phase guaranteed decrease is weaker and more phases are needed
    dd_phases = sum(p.kind == "decrease" for p in runs[Cone.DD].phases)
    sdd_phases = sum(p.kind == "decrease" for p in runs[Cone.SDD].phases)
    assert dd_phases > sdd_phases
    assert abs(runs[Cone.DD].objective - runs[Cone.SDD].objective) <= 0.1
