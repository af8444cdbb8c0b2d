"""Command line: ``htep plan``, ``htep validate`` and ``htep bench``.

Exit codes: 0 solved or valid, 1 unsolvable or invalid, 2 budget
exhausted, 3 usage or input error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from fractions import Fraction
from pathlib import Path

from .bench import (
    DEFAULT_CONFIGS,
    ManifestError,
    PlanFormatError,
    emit_plan,
    ipc_scores,
    parse_plan,
    plan_file,
    read_configs,
    read_manifest,
    records_csv,
    run_suite,
    scores_table,
    timings_csv,
    validate_plan_file,
    write_plots,
)
from .hddl import GroundingLimitError, HDDLError, load
from .search import SearchConfig, htep

EXIT_OK, EXIT_FAIL, EXIT_BUDGET, EXIT_USAGE = 0, 1, 2, 3

log = logging.getLogger("htep")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="htep", description="Temporal HTN planning in plan space.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("plan", help="solve one problem")
    p.add_argument("domain")
    p.add_argument("problem")
    p.add_argument("--heuristic", default="tdgm", choices=("tdgm", "f_tc", "fape"))
    p.add_argument("--flaw-strategy", default="fape", choices=("lcfr", "fape"))
    p.add_argument("--epsilon", default="1/1000", type=Fraction)
    p.add_argument("--timeout", default=64.0, type=float, help="seconds")
    p.add_argument("--mem", default=2048, type=int, help="megabytes")
    p.add_argument("--eager-metric", action="store_true")
    p.add_argument("--plan-out", help="write the plan here instead of stdout")
    p.add_argument("--stats-out", help="write the key = value stats block here")
    p.add_argument("--prune", action="store_true", help="drop delete-relaxed unreachable actions")

    v = sub.add_parser("validate", help="check a plan file")
    v.add_argument("domain")
    v.add_argument("problem")
    v.add_argument("planfile")

    b = sub.add_parser("bench", help="run a benchmark manifest")
    b.add_argument("manifest")
    b.add_argument("--configs", help="JSON list of search configurations")
    b.add_argument("--csv", help="write the run table here (timings go next to it)")
    b.add_argument("--plots", help="directory for score tables and a gnuplot script")
    b.add_argument("--timeout", type=float, help="override every configuration's time budget")
    return parser


def _plan(args) -> int:
    try:
        config = SearchConfig(
            heuristic=args.heuristic,
            flaw_strategy=args.flaw_strategy,
            epsilon=args.epsilon,
            time_budget=args.timeout,
            memory_budget_mb=args.mem,
            eager_metric=args.eager_metric,
        )
    except ValueError as exc:
        print(f"htep: {exc}", file=sys.stderr)
        return EXIT_USAGE
    problem = load(args.domain, args.problem, prune=args.prune)
    result = htep(problem, config)
    stats = result.stats
    log.info("wall time %.3f s", stats.wall_time)
    if args.stats_out:
        Path(args.stats_out).write_text(stats.block(), encoding="utf-8")
    else:
        sys.stderr.write(stats.block())
    if result.solved:
        text = emit_plan(plan_file(result))
        if args.plan_out:
            Path(args.plan_out).write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
        return EXIT_OK
    if stats.outcome in ("timeout", "memory", "nodes"):
        return EXIT_BUDGET
    return EXIT_FAIL


def _validate(args) -> int:
    problem = load(args.domain, args.problem)
    plan = parse_plan(Path(args.planfile).read_text(encoding="utf-8"))
    verdict = validate_plan_file(problem, plan)
    sys.stdout.write(verdict.report())
    return EXIT_OK if verdict.accepted else EXIT_FAIL


def _bench(args) -> int:
    instances = read_manifest(args.manifest)
    configs = list(read_configs(args.configs)) if args.configs else list(DEFAULT_CONFIGS)
    if args.timeout is not None:
        configs = [SearchConfig(**{**c.__dict__, "time_budget": args.timeout}) for c in configs]
    records = run_suite(instances, configs)
    table = records_csv(records)
    if args.csv:
        out = Path(args.csv)
        out.write_text(table, encoding="utf-8")
        out.with_suffix(".timings.csv").write_text(timings_csv(records), encoding="utf-8")
    else:
        sys.stdout.write(table)
    scores = ipc_scores(records)
    sys.stderr.write(scores_table(scores))
    if args.plots:
        write_plots(scores, args.plots)
    invalid = [r for r in records if r.valid is False]
    for r in invalid:
        print(f"htep: {r.instance} {r.config}: emitted plan rejected by the validator", file=sys.stderr)
    return EXIT_FAIL if invalid else EXIT_OK


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("HTEP_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    handler = {"plan": _plan, "validate": _validate, "bench": _bench}[args.command]
    try:
        return handler(args)
    except (HDDLError, PlanFormatError, ManifestError, OSError) as exc:
        print(f"htep: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GroundingLimitError as exc:
        print(f"htep: {exc}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
