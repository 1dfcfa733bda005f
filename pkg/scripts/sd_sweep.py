"""Sweep of the decrease-steps-per-phase setting on one instance.

More decrease steps drive the cost further down before each
recentering, trading extra subproblems per phase against fewer phases
overall.  Defaults to a small stable-set relaxation; pass an SDPA
sparse file (for example SDPLIB's theta1.dat-s) to sweep on it instead.
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
    parser.add_argument("--sd", type=int, nargs="+", default=[1, 5, 10],
                        help="decrease-step settings to sweep")
    parser.add_argument("--cone", choices=["dd", "sdd"], default="sdd")
    parser.add_argument("--eps-g", type=float, default=0.05,
                        help="certified gap target, original cost units")
    args = parser.parse_args(argv)

    raw, norm, X0 = load_instance(args.input)
    print(f"instance {raw.name}: order {raw.order}, "
          f"{raw.num_constraints} constraints, cone={args.cone}, "
          f"eps_gap={args.eps_g:g}")
    print(f"{'s_d':>4} {'status':>22} {'phases':>7} {'subproblems':>12} "
          f"{'objective':>12} {'gap':>10} {'seconds':>8}")
    for sd in args.sd:
        cfg = SolverConfig(cone=Cone(args.cone), decrease_steps=sd,
                           eps_gap=args.eps_g)
        started = time.perf_counter()
        report = solve(norm, X0, cfg)
        wall = time.perf_counter() - started
        phases = sum(p.kind == "decrease" for p in report.phases)
        gap_s = f"{report.gap:.2e}" if report.gap is not None else "none"
        print(f"{sd:>4d} {report.status:>22} {phases:>7d} "
              f"{len(report.records):>12d} {report.objective:>12.5f} "
              f"{gap_s:>10} {wall:>8.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
