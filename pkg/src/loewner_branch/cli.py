"""Command-line entry point: run scenarios, verify, print the schema."""

from __future__ import annotations

import argparse
import sys

from .scenario import run_scenario, run_verification_suite, schema_json


def build_parser():
    parser = argparse.ArgumentParser(
        prog="loewner-branch",
        description="Branching-process evolution families: scenario runner and verifier.")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    run_p = sub.add_parser("run", help="execute a JSON scenario file")
    run_p.add_argument("scenario", help="path to the scenario JSON file")
    run_p.add_argument("--out", help="output directory (overrides the scenario)")
    run_p.add_argument("--seed", type=int, help="simulation seed (overrides the scenario)")
    run_p.add_argument("--tol", type=float, help="solver rel_tol (overrides the scenario)")

    verify_p = sub.add_parser("verify", help="run the cross-module property suite")
    verify_p.add_argument("--quick", action="store_true", help="smaller Monte Carlo sizes")

    sub.add_parser("schema", help="print the scenario JSON schema")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.subcommand == "run":
        return run_scenario(args.scenario, out_dir=args.out, seed=args.seed,
                            rel_tol=args.tol)
    if args.subcommand == "verify":
        checks = run_verification_suite(quick=args.quick, announce=print)
        return 0 if all(passed for _name, passed, _detail in checks) else 1
    print(schema_json())
    return 0


if __name__ == "__main__":
    sys.exit(main())
