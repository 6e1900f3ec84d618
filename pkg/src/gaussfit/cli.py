"""Command-line driver.

    gaussfit verify --config suite.json --out results/
    gaussfit stats bodies/ball10.json --samples 20000
    gaussfit verify --suite --constants C_u=0.1

Exit status: 0 when no check fails, 1 on a check failure, 2 on usage or
configuration errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .pipeline import (BodySpec, ConfigError, Constants, RunConfig, default_suite_path,
                       default_workers, run_suite, write_outputs)
from .reports import to_jsonable

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

COMMANDS = {
    "stats": ("radial",),
    "free-energy": ("radial", "free_energy"),
    "overlap": ("overlap",),
    "bounds": ("bounds",),
    "verify": ("radial", "free_energy", "overlap", "bounds"),
}


def _parse_constants(items) -> dict:
    out = {}
    for item in items or ():
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"constants must be KEY=VAL, got {item!r}")
        try:
            out[key.strip()] = float(val)
        except ValueError:
            raise ConfigError(f"constant {key} is not a number: {val!r}") from None
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("bodies", nargs="*", metavar="BODY.json", help="body description files")
    common.add_argument("--config", type=Path, help="run configuration (JSON)")
    common.add_argument("--suite", action="store_true", help="use the bundled default suite")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--checks", help="comma-separated checks or groups")
    common.add_argument("--samples", type=int, help="uniform samples per body")
    common.add_argument("--workers", type=int, help="parallel bodies (default $GAUSSFIT_WORKERS or 1)")
    common.add_argument("--constants", nargs="+", action="extend", metavar="KEY=VAL",
                        help="override constants, e.g. C_u=0.1 c_bob=0.5")
    common.add_argument("--no-thermo", action="store_true",
                        help="direct estimator only (fast, unreliable at large w)")
    common.add_argument("--json", action="store_true", help="print the JSON report to stdout")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="gaussfit", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "stats": "radial moments and radial checks",
        "free-energy": "free-energy curve, CSV and shape/bound checks",
        "overlap": "relative entropy and total variation at w0",
        "bounds": "Cheeger and spectral-gap bounds with references",
        "verify": "every check; exit 0 iff none fails",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text, description=text)
    return p


def config_from_args(args) -> RunConfig:
    if args.config is not None and args.suite:
        raise ConfigError("--config and --suite are exclusive")
    if args.config is not None or args.suite:
        path = args.config if args.config is not None else default_suite_path()
        cfg = RunConfig.from_file(path)
        if args.bodies:
            raise ConfigError("give bodies either in the config or on the command line")
    else:
        if not args.bodies:
            raise ConfigError("no bodies given")
        cfg = RunConfig(bodies=[BodySpec.from_file(b) for b in args.bodies])
    kw = {}
    if args.seed is not None:
        kw["seed"] = args.seed
    if args.samples is not None:
        kw["samples"] = args.samples
    if args.checks is not None:
        kw["checks"] = tuple(args.checks.split(","))
    if args.out is not None:
        kw["out"] = args.out
    kw["workers"] = args.workers if args.workers is not None else (
        cfg.workers if cfg.workers > 1 else default_workers())
    if args.no_thermo:
        kw["thermo"] = False
    consts = _parse_constants(args.constants)
    if consts:
        kw["constants"] = Constants.with_overrides(cfg.constants, **consts)
    d = {f: getattr(cfg, f) for f in ("bodies", "seed", "samples", "sampler", "w_grid",
                                      "constants", "checks", "out", "workers", "thermo", "m_node")}
    d.update(kw)
    return RunConfig(**d)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
    except ConfigError as exc:
        print(f"gaussfit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report = run_suite(cfg, COMMANDS[args.command])
    if cfg.out is not None:
        write_outputs(report, cfg.out)
    if args.json:
        print(json.dumps(to_jsonable(report.to_dict()), indent=2, sort_keys=True))
    else:
        print(report.table())
        for b in report.bodies:
            for c in b.failed:
                wit = {k: v for k, v in c.witness.items() if k not in ("rows", "curve")}
                print(f"  {b.name}: {c.name} failed; witness {to_jsonable(wit)}; "
                      f"violations {to_jsonable(c.violations[:3])}")
    return EXIT_FAIL if report.failed else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
