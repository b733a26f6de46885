"""Command line entry point: run, sweep, verify, oracle."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import load_sweep_plan
from .errors import ConfigError, InvalidParameter, StepFailure
from .harness import EXIT_ACCEPTANCE, EXIT_INVALID, EXIT_OK, EXIT_SOLVER, run_single, run_sweep, verify
from .oracles import ORACLES, run_oracles


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fastreact",
                                description="Fast-reaction limit solver and verification harness.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="verb", required=True)

    r = sub.add_parser("run", help="solve one configuration and write its run directory")
    r.add_argument("config")
    r.add_argument("--out", default="runs", help="parent directory for run directories")
    r.add_argument("--snapshot-count", type=int, default=None, help="override [output] snapshot_count")

    s = sub.add_parser("sweep", help="run a sweep plan over k, epsilon and grids")
    s.add_argument("plan")
    s.add_argument("--out", default="sweeps")
    s.add_argument("--workers", type=int, default=None, help="worker processes (default: plan value)")
    s.add_argument("--snapshot-count", type=int, default=None)

    v = sub.add_parser("verify", help="re-check acceptance thresholds on stored reports")
    v.add_argument("reports", nargs="*")

    o = sub.add_parser("oracle", help="run analytic oracle suites")
    o.add_argument("name", choices=[*ORACLES, "all"])
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.verb == "run":
            res = run_single(args.config, args.out, args.snapshot_count)
            if res.status == EXIT_OK:
                print(f"run directory: {res.run_dir}")
            else:
                print(f"error: {res.message}", file=sys.stderr)
            return res.status
        if args.verb == "sweep":
            plan = load_sweep_plan(args.plan)
            if args.snapshot_count is not None:
                plan.base = plan.base.with_(snapshot_count=args.snapshot_count)
            report = run_sweep(plan, args.out, args.workers)
            print(report.table())
            for prop in report.properties:
                print(f"{'PASS' if prop['passed'] else 'FAIL'} {prop['name']}: {prop['detail']}")
            return EXIT_OK if report.passed else EXIT_ACCEPTANCE
        if args.verb == "verify":
            if not args.reports:
                parser.error("verify needs at least one report path")
            lines, code = verify(args.reports)
            print("\n".join(lines))
            return code
        if args.verb == "oracle":
            results = run_oracles(None if args.name == "all" else [args.name])
            for r in results:
                print(r.line())
            return EXIT_OK if all(r.passed for r in results) else EXIT_ACCEPTANCE
    except (ConfigError, InvalidParameter) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except StepFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
