"""Command-line entry point.

    swarmevolve run <config> [--seed N] [--jobs N] [--out DIR]
    swarmevolve analyze <DIR>
    swarmevolve plotdata <DIR>
    swarmevolve validate <config>

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from .config import ConfigError, config_hash, config_text, load_config
from .harness import ExperimentError, analyze, emit_plot_data, load_records, run_experiment


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="swarmevolve")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute every (method, run) cell of an experiment")
    run.add_argument("config")
    run.add_argument("--seed", type=int, default=None, help="override master_seed")
    run.add_argument("--jobs", type=int, default=os.cpu_count(),
                     help="parallel runs (default: hardware parallelism)")
    run.add_argument("--out", default="results", help="output directory (default: results)")

    analyze_p = sub.add_parser("analyze", help="measures and pairwise statistics from records")
    analyze_p.add_argument("dir")

    plot = sub.add_parser("plotdata", help="write median-curve and measure CSVs from records")
    plot.add_argument("dir")

    validate = sub.add_parser("validate", help="check a config file and print it resolved")
    validate.add_argument("config")
    return parser


def _cmd_run(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config = replace(config, master_seed=args.seed)
    records = run_experiment(config, args.out, jobs=args.jobs)
    print(f"{len(records)} runs complete (config {config_hash(config)}) -> {args.out}")
    analyze(records, config, out_dir=args.out)
    emit_plot_data(records, config, args.out)
    return 0


def _cmd_analyze(args) -> int:
    config, records = load_records(args.dir)
    result = analyze(records, config, out_dir=args.dir)
    print(f"target fitness: {result.target:.6g}")
    for method, sets in result.measures.items():
        if sets:
            import statistics

            med = statistics.median(s.f_c for s in sets)
            print(f"  {method:<10} runs={len(sets)} median f_c={med:.6g}")
    n_sig = sum(c.significant for c in result.comparisons)
    print(f"{len(result.comparisons)} pairwise tests, {n_sig} significant at 0.01")
    return 0


def _cmd_plotdata(args) -> int:
    config, records = load_records(args.dir)
    for path in emit_plot_data(records, config, args.dir):
        print(f"wrote {path}")
    return 0


def _cmd_validate(args) -> int:
    config = load_config(args.config)
    print(config_text(config), end="")
    print(f"# config_hash {config_hash(config)}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {"run": _cmd_run, "analyze": _cmd_analyze,
                "plotdata": _cmd_plotdata, "validate": _cmd_validate}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except (ExperimentError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
