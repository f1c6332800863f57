"""Command line entry point: ``cramsim run | gen | storage``."""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional

from . import config as config_mod
from .common import CramError
from .controller import storage_budget
from .sim import ALL_MODES, run
from .trace import generate, parse_trace, write_trace

log = logging.getLogger("cramsim")


def _params(text: str) -> dict:
    out = {}
    for item in filter(None, text.split(",")):
        key, sep, value = item.partition("=")
        if not sep:
            raise CramError(f"generator parameter {item!r} is not key=value")
        if value.lower() in ("true", "false"):
            out[key] = value.lower() == "true"
            continue
        try:
            out[key] = int(value, 0)
        except ValueError:
            try:
                out[key] = float(value)
            except ValueError:
                out[key] = value
    return out


def load_trace(source: str, seed: int):
    """``gen:<kind>[:k=v,...]`` runs a generator, anything else is a trace file."""
    if source.startswith("gen:"):
        _, kind, *rest = source.split(":", 2)
        return generate(kind, _params(rest[0]) if rest else {}, seed)
    with open(source) as fh:
        return parse_trace(fh)


def cmd_run(args) -> int:
    cfg = config_mod.load(args.config) if args.config else config_mod.from_mapping({})
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    bad = [m for m in modes if m not in ALL_MODES]
    if bad:
        raise CramError(f"unknown mode(s) {bad}; choose from {', '.join(ALL_MODES)}")
    trace = load_trace(args.trace, cfg.seed)
    log.info("running %d records through %s", len(trace), ", ".join(modes))
    report = run(cfg, trace, modes, jobs=args.jobs, check=not args.no_check)
    if args.out == "-":
        report.write_csv(sys.stdout)
    else:
        with open(args.out, "w", newline="") as fh:
            report.write_csv(fh)
    return 0


def cmd_gen(args) -> int:
    records = generate(args.kind, _params(args.params), args.seed)
    if args.out == "-":
        write_trace(records, sys.stdout)
    else:
        with open(args.out, "w") as fh:
            write_trace(records, fh)
    return 0


def cmd_storage(args) -> int:
    cfg = config_mod.load(args.config) if args.config else config_mod.from_mapping({})
    for name, value in storage_budget(cfg.controller).items():
        print(f"{name},{value}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cramsim", description="Trace-driven compressed-memory simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate a trace under one or more memory modes")
    r.add_argument("--config", help="flat key=value config file")
    r.add_argument("--trace", required=True, help="trace file or gen:<kind>[:k=v,...]")
    r.add_argument("--modes", default=",".join(ALL_MODES))
    r.add_argument("--out", default="-", help="CSV output path ('-' for stdout)")
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--jobs", type=int, default=1, help="simulate modes in parallel processes")
    r.add_argument("--no-check", action="store_true", help="skip shadow-oracle value checks")
    r.set_defaults(func=cmd_run)

    g = sub.add_parser("gen", help="write a synthetic trace")
    g.add_argument("kind")
    g.add_argument("--params", default="", help="comma separated k=v generator parameters")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default="-")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("storage", help="print the on-chip storage budget")
    s.add_argument("--config")
    s.set_defaults(func=cmd_storage)
    return p


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CramError, OSError) as exc:
        print(f"cramsim: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
