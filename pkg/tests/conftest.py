"""Shared fixtures and instance generators.

The acceptance sweep (20 bounded random instances, solved once per
session together with their dense reference solutions) is reused by the
oracle-equivalence, certification, monotonicity and guaranteed-decrease
suites, so it lives here.
"""

from __future__ import annotations

import itertools
import os
import time
from dataclasses import dataclass
from pathlib import Path

import hypothesis
import numpy as np
import pytest

from ddsdp.cones import BlockSet
from ddsdp.oracle import OraclePoint, reference_solve
from ddsdp.outer import SolveReport, SolverConfig, solve
from ddsdp.problem import NormalizedSdp, RawSdp, normalize, phase1_init, random_sdp
from ddsdp.symmat import sym

hypothesis.settings.register_profile("ci", max_examples=200)
hypothesis.settings.register_profile("fast", max_examples=20)

# one line per acceptance criterion, echoed after the run
ACCEPTANCE_VERDICTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_VERDICTS:
            terminalreporter.write_line(line)

# (order, constraints, seed) for the acceptance sweep
ACCEPTANCE_CASES = [
    (4, 2, 11), (4, 3, 12), (4, 4, 13), (4, 3, 14), (4, 2, 15),
    (6, 2, 21), (6, 3, 22), (6, 4, 23), (6, 5, 24), (6, 6, 25),
    (8, 2, 31), (8, 4, 32), (8, 5, 33), (8, 7, 34), (8, 8, 35),
    (10, 2, 41), (10, 4, 42), (10, 6, 43), (10, 8, 44), (10, 10, 45),
]


def bounded_sdp(n: int, m: int, seed: int) -> RawSdp:
    """Random instance whose cost is bounded below on the feasible set.

    A plain Gaussian cost is usually unbounded when m is small, so the
    cost is planted as a positive definite matrix plus a combination of
    the constraints (an interior dual certificate), then normalized.
    """
    raw = random_sdp(n, m, seed)
    rng = np.random.default_rng(seed + 10_000)
    W = rng.standard_normal((n, n))
    S = W @ W.T / np.sqrt(n) + 0.3 * np.eye(n)
    y = 0.5 * rng.standard_normal(m)
    C = sym(S + np.einsum("k,kij->ij", y, raw.A))
    C = C / np.linalg.norm(C)
    return RawSdp(name=f"bounded-{n}-{m}-{seed}", C=C, A=raw.A, b=raw.b,
                  block_structure=(n,))


def theta_sdp(n: int, p: float, seed: int) -> RawSdp:
    """Stable-set relaxation of a random graph.

    max <J, X> over unit-trace PSD matrices vanishing on edges, written
    in min form (C = -J).  The feasible set is compact, so every cost
    level has an analytic center.
    """
    rng = np.random.default_rng(seed)
    edges = [(i, j) for i, j in itertools.combinations(range(n), 2)
             if rng.random() < p]
    A = [np.eye(n)]
    b = [1.0]
    for (i, j) in edges:
        E = np.zeros((n, n))
        E[i, j] = E[j, i] = 1.0
        A.append(E)
        b.append(0.0)
    return RawSdp(name=f"theta-{n}-{len(edges)}-{seed}", C=-np.ones((n, n)),
                  A=np.stack(A), b=np.array(b), block_structure=(n,))


def interior_blocks(n: int, seed: int, margin_lo: float = 0.3,
                    margin_hi: float = 2.0) -> BlockSet:
    """Random block set strictly interior to the 2x2 DD cones.

    x and y exceed |z| by a margin, which also puts every block inside
    the SDD cone and keeps barrier third derivatives moderate (so
    finite-difference comparisons stay well conditioned).
    """
    rng = np.random.default_rng(seed)
    p = n * (n - 1) // 2
    z = rng.uniform(-1.0, 1.0, p)
    x = np.abs(z) + rng.uniform(margin_lo, margin_hi, p)
    y = np.abs(z) + rng.uniform(margin_lo, margin_hi, p)
    return BlockSet(n, np.stack([x, y, z], axis=1))


def sdplib_file(name: str) -> Path | None:
    """Locate an SDPLib data file if the environment provides one."""
    candidates = []
    env = os.environ.get("SDPLIB_DIR")
    if env:
        candidates.append(Path(env) / name)
    candidates.append(Path(__file__).resolve().parent.parent / "data" / name)
    for path in candidates:
        if path.is_file():
            return path
    return None


@dataclass
class AcceptanceRun:
    raw: RawSdp
    norm: NormalizedSdp
    X0: np.ndarray
    report: SolveReport
    ref: OraclePoint
    solve_seconds: float

    @property
    def ref_objective(self) -> float:
        return self.ref.cost * self.norm.cost_scale + self.norm.cost_offset


@pytest.fixture(scope="session")
def acceptance_runs() -> list[AcceptanceRun]:
    runs = []
    for (n, m, seed) in ACCEPTANCE_CASES:
        raw = bounded_sdp(n, m, seed)
        norm = normalize(raw)
        X0 = phase1_init(norm)
        started = time.perf_counter()
        report = solve(norm, X0, SolverConfig(eps_gap=1e-3, max_phases=200,
                                              keep_exit_iterates=True))
        elapsed = time.perf_counter() - started
        ref = reference_solve(norm, 1e-5, X0)
        runs.append(AcceptanceRun(raw=raw, norm=norm, X0=X0, report=report,
                                  ref=ref, solve_seconds=elapsed))
    return runs
