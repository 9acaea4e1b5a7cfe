"""Command line entry point: ``fracinv {direct,invert,table,verify,norms}``.

Exit status is 0 only if every requested run succeeded, 1 if a run failed
(step condition without ``--force``, solver failure, divergence) and 2 for
usage or configuration errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import experiments as ex
from .fem import SolverError
from .primal_dual import StepConditionError
from .verify import run_checks

log = logging.getLogger("fracinv")

# config keys that may be overridden from the command line
_OVERRIDES = [("alpha", float), ("domain", str), ("n", int), ("K", int), ("T", float),
              ("mu", str), ("source", str), ("delta_rel", float), ("beta", float),
              ("gamma", float), ("sigma0", float), ("upsilon0", float), ("n_max", int),
              ("tol_rel", float), ("discrepancy_factor", float)]


def _seed_list(text):
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from None
    if not seeds or min(seeds) < 0:
        raise argparse.ArgumentTypeError("seeds must be non-negative integers")
    return seeds


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="INI file with an [experiment] section")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--force", action="store_true",
                        help="downgrade a violated step condition to a warning")
    common.add_argument("-v", "--verbose", action="store_true")
    for name, kind in _OVERRIDES:
        common.add_argument(f"--{name.replace('_', '-')}", dest=name, type=kind, default=None,
                            metavar=kind.__name__.upper(), help=f"override config key {name}")

    p = argparse.ArgumentParser(prog="fracinv", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("direct", parents=[common], help="solve the direct problem")
    d.add_argument("--seed", type=int, default=None)
    d.add_argument("--refine", action="store_true",
                   help="report the error ratio of K and 2K steps against the eigen-expansion")

    i = sub.add_parser("invert", parents=[common], help="reconstruct a source from noisy data")
    i.add_argument("--seed", type=int, default=None)

    t = sub.add_parser("table", parents=[common], help="run every configuration of a table")
    t.add_argument("table_id", choices=sorted(ex.TABLES))
    t.add_argument("--seeds", type=_seed_list, default=[0], metavar="a,b,c")
    t.add_argument("--seed", type=int, default=None, help="shorthand for a single seed")
    t.add_argument("--workers", type=int, default=1, metavar="N")
    t.add_argument("--timing", action="store_true", help="fill the wall_ms column")

    sub.add_parser("verify", parents=[common], help="run the quick oracle and invariant checks")
    n = sub.add_parser("norms", parents=[common], help="estimate c and |grad| for a configuration")
    n.add_argument("--seed", type=int, default=None)
    return p


def _config(args) -> ex.ExperimentConfig:
    overrides = {name: getattr(args, name) for name, _ in _OVERRIDES}
    overrides["seed"] = getattr(args, "seed", None)
    overrides["out"] = args.out
    return ex.resolve_config(args.config, overrides)


def _print_row(row: ex.ResultRow):
    print(",".join(ex.TABLE_COLUMNS))
    print(",".join(row.csv_fields(timing=True)))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "verify":
            results = run_checks()
            for name, ok, detail in results:
                print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
            return 0 if all(ok for _, ok, _ in results) else 1

        if args.command == "table":
            seeds = [args.seed] if args.seed is not None else args.seeds
            base = {name: getattr(args, name) for name, _ in _OVERRIDES
                    if name not in ("alpha", "source", "delta_rel", "beta", "gamma")}
            file_values = ex.read_config_file(args.config) if args.config else {}
            out_dir = args.out or file_values.get("out", "results")
            # the table fixes source, alpha, noise and weights; other keys pass through
            for key in ("alpha", "source", "delta_rel", "beta", "gamma", "seed", "out"):
                file_values.pop(key, None)
            base = {**file_values, **{k: v for k, v in base.items() if v is not None}}
            if args.workers < 1:
                raise ValueError("--workers must be at least 1")
            rows = ex.run_table(args.table_id, seeds, out_dir, force=args.force,
                                workers=args.workers, timing=args.timing, base=base)
            failed = [r for r in rows if not r.ok]
            print(f"table {args.table_id}: {len(rows)} runs, {len(failed)} failed, written to {out_dir}")
            return 1 if failed else 0

        config = _config(args)
        if args.command == "direct":
            info = ex.run_direct(config, args.out, refine=args.refine)
            print(json.dumps({k: v for k, v in info.items() if k != "config"}, indent=2))
            return 0
        if args.command == "norms":
            print(json.dumps(ex.norms_report(config), indent=2))
            return 0
        if args.command == "invert":
            row = ex.run_invert(config, args.out, force=args.force)
            _print_row(row)
            return 0 if row.ok else 1
    except StepConditionError as exc:
        print(f"error: {exc} (use --force to continue anyway)", file=sys.stderr)
        return 1
    except (SolverError, ArithmeticError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
