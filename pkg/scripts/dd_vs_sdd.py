"""Phase-count comparison of the DD and SDD cones on one instance.

The DD cone is a strictly smaller inner approximation of the PSD cone,
so its per-phase guaranteed decrease is weaker and the run needs more
phases to reach the same certified gap.  Defaults to a small stable-set
relaxation; pass an SDPA sparse file (for example SDPLIB's
theta1.dat-s) to run the comparison on it instead.
"""

import argparse
import sys
import time

from ddsdp.cones import Cone
from ddsdp.outer import SolverConfig, solve

from instances import load_instance


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("input", nargs="?",
                        help="SDPA sparse file (built-in instance if omitted)")
    parser.add_argument("--sd", type=int, default=1,
                        help="decrease steps per phase")
    parser.add_argument("--eps-g", type=float, default=0.05,
                        help="certified gap target, original cost units")
    args = parser.parse_args(argv)

    raw, norm, X0 = load_instance(args.input)
    print(f"instance {raw.name}: order {raw.order}, "
          f"{raw.num_constraints} constraints, s_d={args.sd}, "
          f"eps_gap={args.eps_g:g}")
    rows = []
    for cone in (Cone.DD, Cone.SDD):
        cfg = SolverConfig(cone=cone, decrease_steps=args.sd, eps_gap=args.eps_g)
        started = time.perf_counter()
        report = solve(norm, X0, cfg)
        wall = time.perf_counter() - started
        phases = sum(p.kind == "decrease" for p in report.phases)
        rows.append((cone.value, report.status, phases, len(report.records),
                     report.objective, report.gap, wall))
    print(f"{'cone':>5} {'status':>22} {'phases':>7} {'subproblems':>12} "
          f"{'objective':>12} {'gap':>10} {'seconds':>8}")
    for cone, status, phases, inner, obj, gap, wall in rows:
        gap_s = f"{gap:.2e}" if gap is not None else "none"
        print(f"{cone:>5} {status:>22} {phases:>7d} {inner:>12d} "
              f"{obj:>12.5f} {gap_s:>10} {wall:>8.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
