"""SDP solver that only ever factors, recenters, and solves diagonally
dominant (or scaled diagonally dominant) conic subproblems.

The solver alternates cost-decrease steps over a DD/SDD slice of the
current Cholesky basis with recentering steps that restore proximity to
the central path, and turns the recentering duals into certified bounds
on the duality gap.
"""

from .symmat import CholFactor, cholesky, congruence, frob_inner, log_det, is_psd
from .cones import BlockSet, Cone, identity_blocks, psi_assemble, is_dd, is_sdd
from .problem import RawSdp, NormalizedSdp, parse_sdpa, write_sdpa, normalize, random_sdp, recover_objective, phase1_init
from .inner import AffineSlice, LineSearchConfig, NewtonState, build_slice, centering_solve, decrease_solve
from .outer import SolverConfig, SolveReport, TheoryConstants, solve, theory_constants, t_bounds, certified_gap, hat_x
from .oracle import OraclePoint, central_path_point, analytic_center, reference_solve

__version__ = "0.1.0"

__all__ = [
    "CholFactor", "cholesky", "congruence", "frob_inner", "log_det", "is_psd",
    "BlockSet", "Cone", "identity_blocks", "psi_assemble", "is_dd", "is_sdd",
    "RawSdp", "NormalizedSdp", "parse_sdpa", "write_sdpa", "normalize",
    "random_sdp", "recover_objective", "phase1_init",
    "AffineSlice", "LineSearchConfig", "NewtonState", "build_slice",
    "centering_solve", "decrease_solve",
    "SolverConfig", "SolveReport", "TheoryConstants", "solve",
    "theory_constants", "t_bounds", "certified_gap", "hat_x",
    "OraclePoint", "central_path_point", "analytic_center", "reference_solve",
    "__version__",
]
