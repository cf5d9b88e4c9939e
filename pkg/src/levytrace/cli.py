"""Command line entry point ``levytrace``.

::

    levytrace run <config> [--seed N] [--workers N] [--out DIR]
    levytrace validate <config>
    levytrace plot <report.csv> <x> <y> <out.plot> [--log]

Exit codes: 0 all checks pass, 1 configuration error, 2 a check failed or
a numeric error occurred, 3 only inconclusive checks besides passes.
"""
from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from pathlib import Path

from .config import load_config
from .errors import ConfigError, GeometryError, LevyTraceError, NumericError
from .experiments import FAIL, INCONCLUSIVE, run_experiment
from .tables import emit_plotdata

__all__ = ["main", "exit_code"]

EXIT_OK, EXIT_CONFIG, EXIT_FAIL, EXIT_INCONCLUSIVE = 0, 1, 2, 3


def exit_code(checks):
    statuses = {c.status for c in checks}
    if FAIL in statuses:
        return EXIT_FAIL
    if INCONCLUSIVE in statuses:
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def _out_dir(args, cfg):
    if args.out:
        return Path(args.out)
    if cfg.out:
        return Path(cfg.out)
    env = os.environ.get("LEVYTRACE_OUT")
    if env:
        return Path(env)
    return Path("levytrace_out") / cfg.kind.value


def _cmd_run(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        cfg = dataclasses.replace(cfg, workers=args.workers)
    out = _out_dir(args, cfg)
    try:
        checks = run_experiment(cfg, out)
    except (NumericError, GeometryError) as exc:
        print(f"levytrace: {type(exc).__name__}: {exc}", file=sys.stderr)
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.txt").write_text(f"fail         {cfg.kind.value} [numeric] {exc}\n",
                                         encoding="utf-8")
        return EXIT_FAIL
    lines = [c.line() for c in checks]
    (out / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    for line in lines:
        print(line)
    return exit_code(checks)


def _cmd_validate(args):
    cfg = load_config(args.config)
    if cfg.domain.shape != "square" or cfg.domain.file:
        cfg.domain.build(cfg.d)
    print(f"ok: {cfg.kind.value}")
    return EXIT_OK


def _cmd_plot(args):
    emit_plotdata(args.report, args.x, args.y, args.out, log=args.log)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="levytrace", description="heat trace experiments")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--seed", type=int)
    r.add_argument("--workers", type=int)
    r.add_argument("--out")
    r.set_defaults(func=_cmd_run)
    v = sub.add_parser("validate", help="parse and check a config without running it")
    v.add_argument("config")
    v.set_defaults(func=_cmd_validate)
    pl = sub.add_parser("plot", help="write a two-column plot-data file from a report")
    pl.add_argument("report")
    pl.add_argument("x")
    pl.add_argument("y")
    pl.add_argument("out")
    pl.add_argument("--log", action="store_true", help="log10 of both columns")
    pl.set_defaults(func=_cmd_plot)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"levytrace: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LevyTraceError as exc:
        print(f"levytrace: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
