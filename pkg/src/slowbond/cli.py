"""Command-line entry point.

Exit codes: 0 success, 1 an acceptance threshold failed, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError, SchemaMismatch, SlowBondError
from .harness import EXPERIMENTS, load_result, load_spec, report, run, write_result
from .lpp import NO_CONSTRAINT, RegionConstraint, geodesic, passage_time
from .tasep import InitialCondition, StopRule, simulate
from .weights import WeightField

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def _constraint(args) -> RegionConstraint:
    if not args.avoid_diagonal:
        return NO_CONSTRAINT
    seg = tuple(args.segment) if args.segment else None
    return RegionConstraint("avoid_strict_upper_diagonal", seg)


def _cmd_lpp(args) -> int:
    field = WeightField(args.seed, args.r)
    c = _constraint(args)
    if args.what == "time":
        print(repr(passage_time(field, tuple(args.source), tuple(args.target), c)))
        return EXIT_OK
    g = geodesic(field, tuple(args.source), tuple(args.target), c)
    if args.csv:
        g.to_csv(args.csv, field)
    else:
        print(json.dumps({"weight": g.weight, "vertices": g.vertices.tolist()}))
    return EXIT_OK


def _cmd_tasep(args) -> int:
    if args.ic == "step":
        ic = InitialCondition.step()
    else:
        ic = InitialCondition.bernoulli(args.p, args.config_seed, args.half_width)
    if (args.time is None) == (args.crossings is None):
        raise ConfigError([("stop", "give exactly one of --time or --crossings")])
    stop = StopRule.time(args.time) if args.time is not None else StopRule.crossings(args.crossings)
    field = WeightField(args.seed, args.r) if args.coupled else None
    log = simulate(ic, args.r, stop, tuple(args.window), seed=args.seed, field=field, tail_particles=args.tail)
    if args.csv:
        log.to_csv(args.csv)
    summary = {
        "events": len(log),
        "stop_time": log.stop_time,
        "validity_horizon": log.validity_horizon,
        "crossings": int(len(log.crossing_times())),
    }
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def _cmd_exp(args) -> int:
    overrides = {"master_seed": args.seed, "reps": args.reps, "out_dir": args.out, "workers": args.workers}
    spec = load_spec(args.config, args.name, overrides)
    result = run(spec)
    out = spec.out_dir or "results"
    path = write_result(result, out)
    print(report([result]), end="")
    print(f"wrote {path}")
    return EXIT_OK if result["passed"] else EXIT_FAIL


def _cmd_report(args) -> int:
    results = [load_result(p) for p in args.results]
    print(report(results, args.out), end="")
    return EXIT_OK if all(r.get("passed", True) for r in results) else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="slowbond", description="TASEP slow-bond and last-passage percolation laboratory")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    lp = sub.add_parser("lpp", help="passage times and geodesics on a seeded field")
    lp.add_argument("what", choices=["time", "geodesic"])
    lp.add_argument("--seed", type=int, default=0)
    lp.add_argument("--r", type=float, default=1.0)
    lp.add_argument("--from", dest="source", nargs=2, type=int, default=[0, 0], metavar=("X", "Y"))
    lp.add_argument("--to", dest="target", nargs=2, type=int, required=True, metavar=("X", "Y"))
    lp.add_argument("--avoid-diagonal", action="store_true", help="forbid y >= x away from the endpoints")
    lp.add_argument("--segment", nargs=2, type=int, metavar=("LO", "HI"))
    lp.add_argument("--csv", help="write the geodesic as x,y,value CSV")
    lp.set_defaults(func=_cmd_lpp)

    tp = sub.add_parser("tasep", help="event-driven simulation")
    tp.add_argument("what", choices=["run"])
    tp.add_argument("--ic", choices=["step", "bernoulli"], default="step")
    tp.add_argument("--p", type=float, default=0.5)
    tp.add_argument("--config-seed", type=int, default=0)
    tp.add_argument("--half-width", type=int, default=200)
    tp.add_argument("--r", type=float, default=0.5)
    tp.add_argument("--time", type=float)
    tp.add_argument("--crossings", type=int)
    tp.add_argument("--window", nargs=2, type=int, default=[0, 0], metavar=("A", "B"))
    tp.add_argument("--seed", type=int, default=0)
    tp.add_argument("--coupled", action="store_true", help="take waiting times from the seeded lattice field")
    tp.add_argument("--tail", type=int, help="number of left-tail particles to simulate")
    tp.add_argument("--csv", help="write events as time,from_site,particle_label CSV")
    tp.set_defaults(func=_cmd_tasep)

    ex = sub.add_parser("exp", help="run an experiment from a YAML config")
    ex.add_argument("name", choices=EXPERIMENTS)
    ex.add_argument("--config", required=True)
    ex.add_argument("--seed", type=int)
    ex.add_argument("--reps", type=int)
    ex.add_argument("--out")
    ex.add_argument("--workers", type=int)
    ex.set_defaults(func=_cmd_exp)

    rp = sub.add_parser("report", help="summarize result files")
    rp.add_argument("results", nargs="*")
    rp.add_argument("--out", help="directory for plot-data CSV files")
    rp.set_defaults(func=_cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        for field, msg in exc.errors:
            print(f"config error: {field}: {msg}" if field else f"config error: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except SchemaMismatch as exc:
        print(f"schema mismatch: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SlowBondError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
