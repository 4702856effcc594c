"""Command line: plan one scenario, benchmark a suite, dump an SDF, generate a suite.

Exit codes: 0 when the command ran to completion (whatever the per-plan
outcome), 2 for invalid input, 1 for file system errors.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .bench import export_result, run_benchmark, write_report
from .errors import InvalidArgumentError, NumericalError, OutOfBoundsError, ScenarioError
from .scenario import generate_suite, load_scenario, load_suite, write_suite
from .solver import PLANNERS, run_planner

EXIT_OK = 0
EXIT_IO = 1
EXIT_INPUT = 2


def _planner_list(text):
    names = [p.strip() for p in text.split(",") if p.strip()]
    if names == ["all"]:
        return list(PLANNERS)
    bad = [p for p in names if p not in PLANNERS]
    if bad or not names:
        raise argparse.ArgumentTypeError(
            f"unknown planner(s) {', '.join(bad) or '(none)'}; choose from {', '.join(PLANNERS)} or 'all'"
        )
    return names


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="minsum-planner",
        description="GP trajectory planning by min-sum message passing, with a batch Gauss-Newton baseline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="plan one scenario and write trajectory, summary and figure")
    p.add_argument("scenario", type=Path)
    p.add_argument("--planner", default="ms2mp", choices=PLANNERS)
    p.add_argument("--out", type=Path, default=Path("out"))
    p.add_argument("--upsample", type=int, default=None, metavar="F",
                   help="also write the trajectory GP-interpolated F times per interval")
    p.add_argument("--no-plot", action="store_true", help="skip the PNG figure")

    b = sub.add_parser("bench", help="run planners over a suite and write the report")
    b.add_argument("suite", type=Path,
                   help="directory of scenario files, or one scenario file (expanded when it has a suite block)")
    b.add_argument("--planners", type=_planner_list, default=list(PLANNERS), metavar="LIST",
                   help=f"comma-separated subset of {','.join(PLANNERS)} (default: all)")
    b.add_argument("--seed", type=int, default=None,
                   help="regenerate the suite from this seed (single-file suites only)")
    b.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    b.add_argument("--out", type=Path, default=Path("bench_out"))
    b.add_argument("--no-plot", action="store_true", help="skip the PNG figure")

    s = sub.add_parser("sdf", help="write the gridded signed distance field of a scenario")
    s.add_argument("scenario", type=Path)
    s.add_argument("--out", type=Path, required=True)

    g = sub.add_parser("gen-suite", help="write a generated cluttered suite as scenario files")
    g.add_argument("--count", type=int, default=24)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", type=Path, required=True)
    return parser


def cmd_plan(args) -> int:
    scenario = load_scenario(args.scenario)
    result = run_planner(args.planner, scenario)
    stem = f"{scenario.name}_{args.planner}"
    paths = export_result(result, args.out, stem=stem, upsample=args.upsample)
    if not args.no_plot:
        from .plotting import plot_plan
        paths["figure"] = plot_plan(scenario, result, args.out / f"{stem}.png")
    print(
        f"{scenario.name} {args.planner}: converged={result.converged} iterations={result.iterations} "
        f"collision_free={result.collision_free} min_clearance={result.min_clearance:.4g} "
        f"time={result.wall_time:.4f}s"
    )
    for key, path in paths.items():
        print(f"  {key}: {path}")
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.suite.is_dir() and args.seed is not None:
        raise InvalidArgumentError("--seed only applies to a single suite file, not a directory")
    suite = load_suite(args.suite, seed=args.seed)
    report = run_benchmark(suite, args.planners, jobs=args.jobs, seed=args.seed)
    paths = write_report(report, args.out)
    if not args.no_plot:
        from .plotting import plot_report
        paths["figure"] = plot_report(report, args.out / "report.png")
    print(report.table())
    print(f"digest (timings excluded): {report.digest()}")
    for key, path in paths.items():
        print(f"  {key}: {path}")
    return EXIT_OK


def cmd_sdf(args) -> int:
    scenario = load_scenario(args.scenario)
    sdf = scenario.sdf
    args.out.parent.mkdir(parents=True, exist_ok=True)
    sdf.save(args.out)
    print(f"{args.out}: {sdf.rows}x{sdf.cols} grid, cell {sdf.cell_size}")
    return EXIT_OK


def cmd_gen_suite(args) -> int:
    if args.count < 1:
        raise InvalidArgumentError(f"--count must be >= 1, got {args.count}")
    paths = write_suite(generate_suite(args.count, args.seed), args.out)
    print(f"wrote {len(paths)} scenarios to {args.out}")
    return EXIT_OK


COMMANDS = {"plan": cmd_plan, "bench": cmd_bench, "sdf": cmd_sdf, "gen-suite": cmd_gen_suite}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        return COMMANDS[args.command](args)
    except (ScenarioError, InvalidArgumentError, OutOfBoundsError, NumericalError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
