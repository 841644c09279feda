"""Command-line driver: ``nestinst PROBLEM [options]``."""
from __future__ import annotations

import argparse
import sys

from .errors import NestInstError
from .pipeline import BACKENDS, Flags, StageError, run_pipeline
from .problem import parse_problem, print_problem

EXIT_INPUT_ERROR = 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="nestinst",
        description="Instantiate a hierarchic clause set into ground clauses and decide them.",
    )
    p.add_argument("problem", help="problem file (s-expression format), or - for stdin")
    p.add_argument("--backend", choices=BACKENDS, help="ground decision route (default: bounded)")
    p.add_argument("--window", type=int, metavar="N", help="integer search window [-N, N] for the bounded backend")
    p.add_argument("--free-domain", type=int, metavar="N", help="domain size for uninterpreted sorts")
    p.add_argument("--max-rounds", type=int, metavar="N", help="hyper-linking round limit")
    p.add_argument("--no-chi", action="store_true", default=None, help="leave chi out of non-empty pools")
    p.add_argument("--shift", action="store_true", default=None, help="absorb array index offsets first")
    p.add_argument(
        "--copy-elements", nargs="?", const="auto", metavar="SORT",
        help="move element-side uses of an integer sort to a primed copy",
    )
    p.add_argument("--emit-instances", metavar="PATH", help="write the ground clause set as a problem file")
    p.add_argument("--emit-smtlib", metavar="PATH", help="write the ground clause set as SMT-LIB2")
    p.add_argument("--solver", metavar="CMD", help="external solver command (default: $NESTINST_SOLVER)")
    p.add_argument("--timeout", type=float, help="external solver timeout in seconds")
    p.add_argument("--json", action="store_true", help="print the report as JSON")
    p.add_argument("--timings", action="store_true", help="include per-stage timings in the report")
    p.add_argument("--print", action="store_true", dest="print_problem", help="print the parsed problem and exit")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.problem == "-":
            text = sys.stdin.read()
        else:
            with open(args.problem, encoding="utf-8") as fh:
                text = fh.read()
    except OSError as e:
        print(f"nestinst: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    try:
        problem = parse_problem(text)
    except NestInstError as e:
        print(f"nestinst: {args.problem}:{e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    if args.print_problem:
        sys.stdout.write(print_problem(problem))
        return 0
    try:
        flags = Flags.from_options(
            problem.options,
            backend=args.backend,
            window=args.window,
            free_domain=args.free_domain,
            max_rounds=args.max_rounds,
            no_chi=args.no_chi,
            shift=args.shift,
            copy_elements=args.copy_elements,
            emit_instances=args.emit_instances,
            emit_smtlib=args.emit_smtlib,
            solver=args.solver,
            timeout=args.timeout,
        )
        report = run_pipeline(problem, flags)
    except StageError as e:
        print(f"nestinst: error in stage {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except (ValueError, OSError) as e:
        print(f"nestinst: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    sys.stdout.write(report.to_json(args.timings) if args.json else report.to_text())
    if args.timings and not args.json:
        for stage, secs in report.timings.items():
            print(f"time {stage}: {secs:.4f}s")
    return report.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
