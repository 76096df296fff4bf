"""Command-line interface for the benchmark harness.

Subcommands:
  run <config>                  run one experiment, write CSVs + JSON record
  compare <config> [config...]  run several configs against a shared reference
  sweep <config> --param p=0..12  rerun over a parameter range
  emit <record.json> --kind boxplot  turn a record into plot-data files

Exit codes: 0 ok, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys

from .bench import (
    PLOT_KINDS,
    ConfigError,
    ExperimentConfig,
    NumericalFailure,
    RunRecord,
    compare_methods,
    emit_plotdata,
    run_experiment,
    sweep,
)
from .odes import StiffnessError
from .rangefinder import RangefinderNonconvergence

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

# Sweep values may be integers (rank, oversampling, seeds, ...) or floats
# (h, T, tolerance); ranges like 0..12 are integer-only.
_INT_PARAMS = {"rank", "oversampling", "corange_oversampling", "power_iterations",
               "seeds", "master_seed", "output_every"}


def _parse_sweep(spec: str) -> tuple[str, list]:
    """'p=0..12' or 'rank=5,10,20' -> (param, values). 'p' and 'q' are
    accepted as shorthands for oversampling and power_iterations."""
    if "=" not in spec:
        raise ConfigError(f"--param must look like name=lo..hi or name=v1,v2,...; got {spec!r}")
    name, _, rhs = spec.partition("=")
    name = {"p": "oversampling", "q": "power_iterations", "r": "rank"}.get(name.strip(), name.strip())
    rhs = rhs.strip()
    try:
        if ".." in rhs:
            lo, hi = rhs.split("..")
            return name, list(range(int(lo), int(hi) + 1))
        cast = int if name in _INT_PARAMS else float
        return name, [cast(v) for v in rhs.split(",")]
    except ValueError as exc:
        raise ConfigError(f"bad sweep range {spec!r}: {exc}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dynlr", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment config")
    p_run.add_argument("config")

    p_cmp = sub.add_parser("compare", help="run several configs, shared reference")
    p_cmp.add_argument("configs", nargs="+")

    p_swp = sub.add_parser("sweep", help="rerun a config over a parameter range")
    p_swp.add_argument("config")
    p_swp.add_argument("--param", required=True, help="e.g. p=0..12 or rank=5,10,20")

    p_emit = sub.add_parser("emit", help="emit plot data from a JSON record")
    p_emit.add_argument("records", nargs="+")
    p_emit.add_argument("--kind", required=True, choices=PLOT_KINDS)
    p_emit.add_argument("--outdir", default="bench_out/plots")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            record = run_experiment(ExperimentConfig.from_file(args.config))
            med = record.aggregates["rel_error"]["median"][-1]
            print(f"final median relative error: {med:.6e}")
        elif args.command == "compare":
            cfgs = [ExperimentConfig.from_file(c) for c in args.configs]
            _, table = compare_methods(cfgs)
            for row in table:
                if row["time"] == table[-1]["time"]:
                    print(f"{row['method']:>16s}  t={row['time']:g}  median={row['median']:.6e}")
        elif args.command == "sweep":
            cfg = ExperimentConfig.from_file(args.config)
            param, values = _parse_sweep(args.param)
            records = sweep(cfg, param, values)
            for val, rec in zip(values, records):
                med = rec.aggregates["rel_error"]["median"][-1]
                print(f"{param}={val}: final median relative error {med:.6e}")
        elif args.command == "emit":
            records = [RunRecord.from_json(p) for p in args.records]
            for path in emit_plotdata(records, args.kind, args.outdir):
                print(f"wrote {path}")
    except (ConfigError, FileNotFoundError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, StiffnessError, RangefinderNonconvergence,
            FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
