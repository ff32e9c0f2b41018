"""Command-line front end: single runs, parameter sweeps, oracle validation, topology dumps.

Exit codes: 0 success, 1 validation failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import engine, topology as topo, validate
from .config import config_from_sources, config_hash
from .errors import ConfigError

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_USAGE = 2


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key (repeatable, last one wins)")
    parser.add_argument("--seed", type=int, help="override the seed")
    parser.add_argument("--out", default="out", help="output directory (default: ./out)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="streamsched",
                                     description="Cross-layer adaptive video streaming simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one simulation and write summary/run CSVs")
    _add_common(p_run)
    p_run.add_argument("--trace", action="store_true", help="also write per-slot trace CSVs")

    p_sweep = sub.add_parser("sweep", help="run once per value of a named parameter")
    _add_common(p_sweep)
    p_sweep.add_argument("--param", required=True, choices=sorted(engine.SWEEP_PARAMETERS),
                         help="parameter to sweep")
    p_sweep.add_argument("--values", required=True, help="comma-separated values")

    p_val = sub.add_parser("validate", help="run the randomized oracle suites")
    p_val.add_argument("--instances", type=int, default=10_000, help="scheduler instances (default 10000)")
    p_val.add_argument("--cases", type=int, default=1000, help="line-search cases (default 1000)")
    p_val.add_argument("--seed", type=int, default=7)
    p_val.add_argument("--inject-failure", action="store_true", help=argparse.SUPPRESS)

    p_topo = sub.add_parser("topology", help="generate a topology and dump nodes/gains CSVs")
    _add_common(p_topo)
    return parser


def cmd_run(args: argparse.Namespace) -> int:
    cfg = config_from_sources(args.config, args.overrides, args.seed)
    os.makedirs(args.out, exist_ok=True)
    result = engine.run(cfg, collect_traces=args.trace)
    engine.write_summary_csv(result, os.path.join(args.out, "summary.csv"))
    engine.write_run_csv(result, cfg, os.path.join(args.out, "run.csv"))
    if args.trace:
        engine.write_trace_csvs(result, args.out)
    qualities = [u.average_quality for u in result.users if u.delivered_chunks]
    buffering = [u.buffering_percent for u in result.users]
    print(
        f"utility={result.utility:.6g} meanQuality={np.mean(qualities) if qualities else float('nan'):.4f} "
        f"meanBuffering%={np.mean(buffering):.3f} drained={result.drain_complete} slots={result.slots_run}"
    )
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = config_from_sources(args.config, args.overrides, args.seed)
    raw_values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not raw_values:
        raise ConfigError("sweep: empty value list")
    values: list[str] = []
    for v in raw_values:
        if v in values:
            print(f"warning: duplicate sweep value {v!r} ignored", file=sys.stderr)
        else:
            values.append(v)
    os.makedirs(args.out, exist_ok=True)
    results = engine.sweep(cfg, args.param, values)
    agg_path = os.path.join(args.out, "aggregate.csv")
    with open(agg_path, "w", newline="") as fh:
        fh.write(f"# config={config_hash(cfg)} seed={cfg.seed}\n")
        writer = csv.writer(fh)
        writer.writerow([args.param, "utility", "meanQuality", "meanDelay", "meanBufferingPercent", "drainComplete"])
        for value, result in results:
            subdir = os.path.join(args.out, f"{args.param}={value}")
            os.makedirs(subdir, exist_ok=True)
            engine.write_summary_csv(result, os.path.join(subdir, "summary.csv"))
            run_cfg = engine.build_config({**engine.flatten_config(cfg), engine.SWEEP_PARAMETERS[args.param]: str(value)})
            engine.write_run_csv(result, run_cfg, os.path.join(subdir, "run.csv"))
            delivered = [u for u in result.users if u.delivered_chunks]
            writer.writerow([
                value,
                f"{result.utility:.10g}",
                f"{np.mean([u.average_quality for u in delivered]) if delivered else float('nan'):.6g}",
                f"{np.mean([u.average_delay for u in delivered]) if delivered else float('nan'):.6g}",
                f"{np.mean([u.buffering_percent for u in result.users]):.6g}",
                int(result.drain_complete),
            ])
    print(f"swept {args.param} over {len(values)} values -> {agg_path}")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    results = validate.run_all(args.instances, args.cases, args.seed, args.inject_failure)
    status = EXIT_OK
    for suite in results:
        print(f"{suite.name}: {suite.passed}/{suite.total}")
        if not suite.ok and status == EXIT_OK:
            status = EXIT_VALIDATION
            print(json.dumps({"suite": suite.name, "counterexample": suite.first_failure}, default=str),
                  file=sys.stderr)
    return status


def cmd_topology(args: argparse.Namespace) -> int:
    cfg = config_from_sources(args.config, args.overrides, args.seed)
    os.makedirs(args.out, exist_ok=True)
    graph = engine.build_network(cfg, np.random.SeedSequence(cfg.seed).spawn(3)[0])
    state = topo.topology_state(graph)
    topo.dump_nodes_csv(graph, os.path.join(args.out, "nodes.csv"))
    topo.dump_gains_csv(state, os.path.join(args.out, "gains.csv"))
    print(f"wrote {len(graph.helpers)} helpers, {len(graph.users)} users to {args.out}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "sweep":
            return cmd_sweep(args)
        if args.command == "validate":
            return cmd_validate(args)
        if args.command == "topology":
            return cmd_topology(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
