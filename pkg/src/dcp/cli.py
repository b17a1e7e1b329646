"""Command line entry point: ``dcp run|validate|describe <config.yaml>``."""
from __future__ import annotations

import argparse
import logging
import sys
import traceback

from . import config as config_mod
from .config import ConfigError
from .experiments import run_experiment, validate, with_defaults

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2

log = logging.getLogger("dcp")


def _load(path):
    try:
        return config_mod.load(path)
    except FileNotFoundError:
        raise ConfigError(f"no such config file: {path}") from None


def cmd_run(args) -> int:
    cfg = _load(args.config)
    if args.output_dir:
        cfg.output_dir = args.output_dir
    if args.workers:
        cfg.workers = args.workers
    result = run_experiment(cfg)
    for name, digest in sorted(result.digests.items()):
        log.info("%s  %s", digest[:16], name)
    print(result.output_dir)
    return EXIT_OK


def cmd_validate(args) -> int:
    diags = validate(_load(args.config))
    for d in diags:
        print(d)
    return EXIT_CONFIG if any(d.level == "error" for d in diags) else EXIT_OK


def cmd_describe(args) -> int:
    cfg = _load(args.config)
    eff = with_defaults(cfg)
    print(f"kind: {eff.kind}")
    print(f"output: {eff.resolve_output_dir()}")
    return cmd_validate(args)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dcp", description="Dissipative contact process experiments")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment and write its tables")
    run.add_argument("config")
    run.add_argument("-o", "--output-dir", help="override the output directory")
    run.add_argument("-j", "--workers", type=int, help="worker processes for replicas")
    run.set_defaults(func=cmd_run)
    val = sub.add_parser("validate", help="check a config and report regime diagnostics")
    val.add_argument("config")
    val.set_defaults(func=cmd_validate)
    desc = sub.add_parser("describe", help="print the resolved recipe and regime diagnostics")
    desc.add_argument("config")
    desc.set_defaults(func=cmd_describe)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"invalid config: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # noqa: BLE001
        if args.verbose:
            traceback.print_exc()
        print(f"run failed: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
