"""Command line entry point: ``polar-ray run|list|plot-data``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from .errors import INPUT_ERRORS, PolarRayError
from .report import DEFAULT_SEED, emit_plot_data, run_scenario, write_csv_tables, write_report
from .scenarios import BUILTINS, builtin, list_builtins, load_scenario

EXIT_PASS, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


def resolve_seed(cli_seed: int | None) -> int:
    """--seed wins, then POLAR_RAY_SEED, then the built-in default."""
    if cli_seed is not None:
        return cli_seed
    env = os.environ.get("POLAR_RAY_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise argparse.ArgumentTypeError(f"POLAR_RAY_SEED must be an integer, got {env!r}") from None
    return DEFAULT_SEED


def _load(source: str):
    if source in BUILTINS and not Path(source).exists():
        return builtin(source)
    return load_scenario(source)


def _cmd_run(args) -> int:
    seed = resolve_seed(args.seed)
    sc = _load(args.scenario)
    if args.truncation is not None:
        if args.truncation < 1:
            print("error: --truncation must be at least 1", file=sys.stderr)
            return EXIT_INPUT
        sc = replace(sc, truncation=args.truncation)
    report = run_scenario(sc, seed)
    out = args.out or sc.outputs.get("report")
    if out:
        write_report(report, out)
    csv_dir = args.csv or sc.outputs.get("csv")
    if csv_dir:
        write_csv_tables(report, csv_dir)
    s = report["summary"]
    for r in report["records"]:
        if r["pass"] is False:
            print(f"FAIL {r['check']} point={r['point']} t={r['t']} value={r['value']!r} tol={r['tolerance']!r}")
    print(
        f"{sc.name}: {s['passed']} passed, {s['failed']} failed, {s['skipped']} skipped (seed {seed})"
    )
    return EXIT_PASS if s["overall_pass"] else EXIT_FAIL


def _cmd_list(args) -> int:
    for name in list_builtins():
        print(name)
    return EXIT_PASS


def _cmd_plot_data(args) -> int:
    try:
        report = json.loads(Path(args.report).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read report {args.report}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        emit_plot_data(report, args.out, args.point)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polar-ray", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the check battery on a scenario file or builtin name")
    run.add_argument("scenario", help="path to a scenario JSON file, or a builtin name")
    run.add_argument("--out", help="write the JSON report here")
    run.add_argument("--csv", help="write CSV tables into this directory")
    run.add_argument("--seed", type=int, help="seed for random group samples")
    run.add_argument("--truncation", type=int, help="override the series truncation N")
    run.set_defaults(func=_cmd_run)

    lst = sub.add_parser("list", help="list builtin scenarios")
    lst.set_defaults(func=_cmd_list)

    plot = sub.add_parser("plot-data", help="extract (t, angle_max) from a report")
    plot.add_argument("report")
    plot.add_argument("out")
    plot.add_argument("--point", type=int, help="sample point index (default: first swept point)")
    plot.set_defaults(func=_cmd_plot_data)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_PASS
    try:
        return args.func(args)
    except INPUT_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except argparse.ArgumentTypeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except PolarRayError as exc:
        print(f"check failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
