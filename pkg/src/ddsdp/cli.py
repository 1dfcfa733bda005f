"""Command line front end: solve SDPA files, generate random instances,
check that a file parses.

Exit codes: 0 when the certified gap target is reached, 2 when an
iteration budget ran out, 3 on input problems, 4 on numerical failure
(including an unbounded cost).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .cones import Cone
from .inner import LineSearchConfig, MaxIterationsExceeded, SingularKkt
from .outer import (CenteringBudgetExceeded, InfeasibleStart, SolveReport, SolverConfig,
                    SubproblemFailure, solve)
from .problem import (InconsistentDimensions, IndexOutOfBlock, NoInteriorPointFound,
                      RankDeficientConstraints, SdpaSyntaxError, TooManyConstraints,
                      normalize, parse_sdpa, phase1_init, random_sdp, write_sdpa)
from .symmat import NotPositiveDefinite

TRACE_HEADER = ["phase", "kind", "inner_iter", "cost", "lambda0", "tau",
                "t_lo", "t_hi", "gap", "millis"]

INPUT_ERRORS = (SdpaSyntaxError, InconsistentDimensions, IndexOutOfBlock,
                RankDeficientConstraints, TooManyConstraints, NoInteriorPointFound,
                InfeasibleStart, NotPositiveDefinite, OSError, ValueError)


def _fmt(value) -> str:
    if value is None:
        return ""
    return repr(float(value))


def write_trace(report: SolveReport, path: Path) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_HEADER)
        for r in report.records:
            writer.writerow([r.phase, r.kind, r.inner_iter, _fmt(r.cost), _fmt(r.lambda0),
                             _fmt(r.tau), _fmt(r.t_lo), _fmt(r.t_hi), _fmt(r.gap),
                             _fmt(r.millis)])


def report_json(report: SolveReport) -> dict:
    c = report.constants
    return {
        "schema": "report-v1",
        "name": report.name,
        "cone": report.cone.value,
        "status": report.status,
        "message": report.message,
        "objective": report.objective,
        "gap": report.gap,
        "gap_normalized": report.gap_normalized,
        "t_lo": report.t_lo,
        "t_hi": report.t_hi,
        "eps_gap": report.eps_gap,
        "eps_center_final": report.eps_center_final,
        "wall_ms": report.wall_ms,
        "phase_count": len(report.phases),
        "inner_count": len(report.records),
        "constants": {
            "order": c.order,
            "cone": c.cone.value,
            "eta": c.eta,
            "xi": c.xi,
            "phi": c.phi,
            "phi_prime": c.phi_prime,
            "eps_center_star": c.eps_center_star,
            "theta_hat": c.theta_hat,
            "chi": c.chi,
            "t0": c.t0,
            "kappa": c.kappa,
            "logdet_span": c.logdet_span,
            "center_budget": c.center_budget,
        },
        "phases": [{
            "phase": p.phase,
            "kind": p.kind,
            "inner_count": p.inner_count,
            "cost_before": p.cost_before,
            "cost_after": p.cost_after,
            "lambda0": p.lambda0,
            "tau": p.tau,
            "t_lo": p.t_lo,
            "t_hi": p.t_hi,
            "gap": p.gap,
            "millis": p.millis,
        } for p in report.phases],
    }


def _cmd_solve(args) -> int:
    try:
        text = Path(args.input).read_text()
        raw = parse_sdpa(text, name=Path(args.input).stem)
        norm = normalize(raw)
        X0 = phase1_init(norm)
    except INPUT_ERRORS as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 3

    cfg = SolverConfig(cone=Cone(args.cone), decrease_steps=args.sd,
                       eps_gap=args.eps_g, eps_center=args.eps_c,
                       line_search=LineSearchConfig(alpha=args.alpha, beta=args.beta),
                       max_phases=args.max_phases)
    try:
        report = solve(norm, X0, cfg)
    except InfeasibleStart as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 3
    except CenteringBudgetExceeded as exc:
        print(f"budget exhausted: {exc}", file=sys.stderr)
        return 2
    except (SubproblemFailure, SingularKkt, MaxIterationsExceeded, NotPositiveDefinite) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4

    if args.trace:
        write_trace(report, Path(args.trace))
    if args.report:
        Path(args.report).write_text(json.dumps(report_json(report), indent=2) + "\n")
    print(f"name={report.name} status={report.status} objective={report.objective!r} "
          f"gap={_fmt(report.gap) or 'none'} t_lo={_fmt(report.t_lo) or 'none'} "
          f"phases={len(report.phases)} wall_ms={report.wall_ms:.1f}")
    if report.status == "gap_reached":
        return 0
    if report.status == "phase_budget_exceeded":
        return 2
    print(f"numerical failure: {report.message}", file=sys.stderr)
    return 4


def _cmd_generate(args) -> int:
    try:
        raw = random_sdp(args.n, args.m, args.seed)
    except TooManyConstraints as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 3
    text = write_sdpa(raw, comment=raw.name)
    if args.output:
        Path(args.output).write_text(text)
        print(f"wrote {raw.name} to {args.output}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_check(args) -> int:
    try:
        text = Path(args.input).read_text()
        raw = parse_sdpa(text, name=Path(args.input).stem)
    except INPUT_ERRORS as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 3
    blocks = ",".join(str(s) for s in raw.block_structure)
    print(f"name={raw.name} order={raw.order} constraints={raw.num_constraints} "
          f"blocks=[{blocks}]")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ddsdp",
                                     description="Certified SDP solving over DD/SDD cone slices")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve an SDPA sparse file")
    p_solve.add_argument("input")
    p_solve.add_argument("--cone", choices=["dd", "sdd"], default="sdd")
    p_solve.add_argument("--sd", type=int, default=5, help="decrease steps per phase")
    p_solve.add_argument("--eps-g", type=float, default=1e-3,
                         help="certified gap target (original cost units)")
    p_solve.add_argument("--eps-c", type=float, default=1e-2,
                         help="centering gap surrogate target")
    p_solve.add_argument("--alpha", type=float, default=0.25)
    p_solve.add_argument("--beta", type=float, default=0.5)
    p_solve.add_argument("--max-phases", type=int, default=200)
    p_solve.add_argument("--trace", help="write per-subproblem CSV trace here")
    p_solve.add_argument("--report", help="write JSON report here")
    p_solve.set_defaults(func=_cmd_solve)

    p_gen = sub.add_parser("generate", help="generate a random instance")
    p_gen.add_argument("--n", type=int, required=True)
    p_gen.add_argument("--m", type=int, required=True)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("-o", "--output")
    p_gen.set_defaults(func=_cmd_generate)

    p_check = sub.add_parser("check", help="parse a file and print its shape")
    p_check.add_argument("input")
    p_check.set_defaults(func=_cmd_check)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
