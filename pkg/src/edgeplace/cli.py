"""Command line entry point: ``edgeplace run`` and ``edgeplace compare``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import SCENARIOS, ConfigError, ScenarioConfig, Sweep, scenario, schema_json
from .experiments import MissingRuns, compare, run_sweep, write_results

log = logging.getLogger("edgeplace")


def _csv_list(kind):
    def parse(text: str):
        try:
            return [kind(v) for v in text.split(",") if v.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected comma-separated {kind.__name__} values, got {text!r}")

    return parse


def build_sweep(args: argparse.Namespace) -> Sweep:
    if args.config:
        sweep = Sweep.load(args.config)
    elif args.scenario:
        sweep = scenario(args.scenario)
    else:
        sweep = Sweep(base=ScenarioConfig())
    overrides = {}
    for name in ("hosts", "producers", "locations"):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    if overrides:
        sweep.base = sweep.base.replace(**overrides)
    if args.strategy:
        sweep.strategies = [s for group in args.strategy for s in group]
        for s in sweep.strategies:
            if s not in ("distance", "latency", "spatial"):
                raise ConfigError("strategy", f"unknown strategy {s!r}")
    if args.consumers:
        sweep.consumers = [c for group in args.consumers for c in group]
        if any(c < 0 for c in sweep.consumers):
            raise ConfigError("consumers", "consumer counts must be >= 0")
    if args.seed:
        sweep.seeds = [s for group in args.seed for s in group]
        if any(s < 0 for s in sweep.seeds):
            raise ConfigError("seed", "seeds must be >= 0")
    if sweep.base.locations and not Path(sweep.base.locations).exists():
        raise ConfigError("locations", f"file not found: {sweep.base.locations}")
    # validate every cell up front so a bad sweep fails before any work
    sweep.cells()
    return sweep


def cmd_run(args: argparse.Namespace) -> int:
    sweep = build_sweep(args)
    cells = len(sweep.strategies) * len(sweep.consumers) * len(sweep.seeds)
    log.info("running %d cells (%s) with %d worker(s)", cells, sweep.base.scenario, args.workers)
    results = run_sweep(sweep, workers=args.workers)
    path = write_results(results, args.out, sweep)
    print(f"wrote {path} ({len(results)} runs)")
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    try:
        checks = compare(args.results)
    except MissingRuns as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    ok = True
    for name, res in checks:
        print(f"[{name}] {res.line()}")
        for d in res.details:
            print(f"    {d}")
        ok &= res.passed
    return 0 if ok else 1


def cmd_schema(args: argparse.Namespace) -> int:
    print(schema_json())
    return 0


def cmd_scenarios(args: argparse.Namespace) -> int:
    for name, sw in SCENARIOS.items():
        b = sw.base
        print(f"{name}: hosts={b.hosts} producers={b.producers} consumers={sw.consumers} seeds={sw.seeds}")
    return 0


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="edgeplace", description="Edge data placement experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario sweep and write CSV results")
    src = r.add_mutually_exclusive_group()
    src.add_argument("--scenario", choices=sorted(SCENARIOS))
    src.add_argument("--config", help="YAML/JSON sweep config")
    r.add_argument("--strategy", type=_csv_list(str), action="append", help="distance,latency,spatial")
    r.add_argument("--hosts", type=int)
    r.add_argument("--producers", type=int)
    r.add_argument("--consumers", type=_csv_list(int), action="append")
    r.add_argument("--seed", type=_csv_list(int), action="append")
    r.add_argument("--out", default="results")
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--locations", help="CSV with header id,x,y")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="check trend claims over a results directory")
    c.add_argument("results")
    c.set_defaults(func=cmd_compare)

    s = sub.add_parser("schema", help="print the config JSON schema")
    s.set_defaults(func=cmd_schema)

    sc = sub.add_parser("scenarios", help="list bundled scenarios")
    sc.set_defaults(func=cmd_scenarios)
    return p


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
