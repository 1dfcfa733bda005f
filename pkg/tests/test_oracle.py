"""Dense PSD barrier reference solver used to cross-check the conic
solver.  Everything here runs on small bounded instances; Gaussian
instances without a planted dual usually have unbounded level sets and
no analytic center, so they are not used with the oracle."""

import numpy as np
import pytest

from ddsdp.oracle import (
    MAX_ORACLE_ORDER,
    NotConverged,
    analytic_center,
    central_path_point,
    logdet_hessian_matrix,
    reference_solve,
)
from ddsdp.problem import (
    RawSdp,
    normalize,
    phase1_init,
    random_sdp,
    recover_objective,
    svec,
)
from ddsdp.symmat import random_symmetric

from conftest import bounded_sdp, theta_sdp


def _diag_instance(n, seed):
    rng = np.random.default_rng(seed)
    C = np.diag(np.sort(rng.uniform(-1.0, 1.0, n)))
    return RawSdp(name=f"diag-{n}-{seed}", C=C, A=np.array([np.eye(n)]),
                  b=np.array([float(n)]), block_structure=(n,))


def _diag_path_by_bisection(cvec, t, total):
    """Independent solution of the diagonal barrier problem.

    x_i = 1 / (t (c_i - nu)) with nu < min(c) chosen so sum(x) = total;
    the sum is increasing in nu, so bisection applies.
    """
    lo, hi = min(cvec) - 1e6, min(cvec) - 1e-14

    def total_at(nu):
        return float(np.sum(1.0 / (t * (cvec - nu))))

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if total_at(mid) < total:
            lo = mid
        else:
            hi = mid
    nu = 0.5 * (lo + hi)
    return 1.0 / (t * (cvec - nu)), nu


def test_central_path_matches_scalar_bisection():
    raw = _diag_instance(4, 3)
    norm = normalize(raw)
    X0 = phase1_init(norm)
    cvec = np.diag(norm.C)
    for t in (2.0, 20.0, 200.0):
        pt = central_path_point(norm, t, X0)
        x_expect, nu = _diag_path_by_bisection(cvec, t, 4.0)
        assert np.abs(np.diag(pt.X) - x_expect).max() <= 1e-8
        assert np.abs(pt.X - np.diag(np.diag(pt.X))).max() <= 1e-9
        # gamma with X^-1 = t (C - gamma A), A = I/sqrt(n)
        assert pt.duals[0] == pytest.approx(2.0 * nu, rel=1e-6)


def test_path_point_kkt_identity():
    norm = normalize(bounded_sdp(6, 4, 21))
    X0 = phase1_init(norm)
    prev_cost = None
    for t in (6.0, 60.0, 600.0):
        pt = central_path_point(norm, t, X0)
        Xinv = np.linalg.inv(pt.X)
        S = norm.C - np.einsum("k,kij->ij", pt.duals, norm.A)
        assert np.linalg.norm(Xinv - t * S) <= 1e-6 * max(1.0, np.linalg.norm(Xinv))
        # trace of the identity above: cost minus dual value is exactly n/t
        assert pt.cost - pt.duals @ norm.b == pytest.approx(6.0 / t, rel=1e-8)
        if prev_cost is not None:
            assert pt.cost < prev_cost
        prev_cost = pt.cost


def test_path_cost_obeys_duality_bound():
    norm = normalize(bounded_sdp(6, 4, 21))
    X0 = phase1_init(norm)
    tight = reference_solve(norm, 1e-6, X0)
    for t in (6.0, 60.0):
        pt = central_path_point(norm, t, X0)
        assert pt.cost - tight.cost <= 6.0 / t + 1e-6
        assert pt.cost >= tight.cost - 1e-8


def test_analytic_center_is_stationary_and_reachable_from_path():
    norm = normalize(theta_sdp(8, 0.4, 3))
    X0 = phase1_init(norm)
    center = analytic_center(norm, None, X0)
    assert center.decrement <= 1e-9
    # logdet gradient at the center lies in the constraint row space
    Xinv = np.linalg.inv(center.X)
    rows = np.stack([svec(A) for A in norm.A])
    resid = svec(Xinv) - rows.T @ (rows @ svec(Xinv))
    assert np.linalg.norm(resid) <= 1e-7
    # pinning the cost at the center's own level leaves tau at zero
    repinned = analytic_center(norm, center.cost, center.X)
    assert abs(repinned.tau) <= 1e-6
    assert np.abs(repinned.X - center.X).max() <= 1e-6


def test_center_dual_is_path_parameter():
    norm = normalize(theta_sdp(8, 0.4, 3))
    X0 = phase1_init(norm)
    center = analytic_center(norm, None, X0)
    level = center.cost - 0.02
    pinned = analytic_center(norm, level, X0)
    assert pinned.tau < 0.0  # below the center the path parameter is -tau
    path = central_path_point(norm, abs(pinned.tau), X0)
    assert path.cost == pytest.approx(level, abs=1e-6)
    assert np.abs(path.X - pinned.X).max() <= 1e-6


def test_reference_solve_min_eigenvalue_instance():
    raw = RawSdp(name="mineig", C=np.diag([1.0, 0.0]), A=np.array([np.eye(2)]),
                 b=np.array([1.0]), block_structure=(2,))
    norm = normalize(raw)
    ref = reference_solve(norm, 1e-6, phase1_init(norm))
    assert recover_objective(norm, ref.X) == pytest.approx(0.0, abs=1e-6)
    assert np.abs(ref.X - np.diag([0.0, 1.0])).max() <= 1e-3


def test_reference_solve_zero_cost_short_circuits():
    raw = RawSdp(name="const", C=2.0 * np.eye(3), A=np.array([np.eye(3)]),
                 b=np.array([3.0]), block_structure=(3,))
    norm = normalize(raw)
    assert norm.cost_scale == 0.0
    ref = reference_solve(norm, 1e-3, phase1_init(norm))
    assert ref.cost == 0.0
    assert recover_objective(norm, ref.X) == pytest.approx(6.0, abs=1e-9)
    assert np.allclose(ref.X, np.eye(3), atol=1e-7)


def test_logdet_hessian_quadratic_form():
    rng = np.random.default_rng(11)
    for _ in range(10):
        n = int(rng.integers(2, 7))
        S = random_symmetric(rng, n)
        U = random_symmetric(rng, n)
        V = random_symmetric(rng, n)
        got = svec(U) @ logdet_hessian_matrix(S) @ svec(V)
        expect = np.trace(S @ U @ S @ V)
        assert got == pytest.approx(expect, rel=1e-10, abs=1e-10)


def test_oracle_guards():
    norm = normalize(bounded_sdp(6, 4, 21))
    X0 = phase1_init(norm)
    with pytest.raises(ValueError):
        central_path_point(norm, 0.0, X0)
    with pytest.raises(ValueError):
        reference_solve(norm, 0.0, X0)
    big = normalize(random_sdp(MAX_ORACLE_ORDER + 1, 2, 0))
    with pytest.raises(ValueError):
        reference_solve(big, 1e-3, np.eye(MAX_ORACLE_ORDER + 1))


def test_oracle_rejects_indefinite_start():
    norm = normalize(bounded_sdp(6, 4, 21))
    X0 = phase1_init(norm)
    bad = X0 - 10.0 * norm.C  # feasible but indefinite
    assert np.linalg.eigvalsh(bad)[0] < 0
    with pytest.raises(NotConverged):
        analytic_center(norm, None, bad)


def test_unbounded_level_sets_fail_honestly():
    # plain Gaussian cost: the logdet is unbounded on the feasible set,
    # so no analytic center exists and the oracle reports nonconvergence
    norm = normalize(random_sdp(5, 3, 2))
    with pytest.raises(NotConverged):
        analytic_center(norm, None, phase1_init(norm), max_iter=120)
