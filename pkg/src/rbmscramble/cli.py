"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 oracle-size error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from .drivers import DriverError, OracleSizeError
from .experiments import (
    ConfigError,
    ExperimentConfig,
    cmd_entropy,
    cmd_fisher,
    cmd_hidden_density,
    cmd_ieta,
    cmd_otoc,
    cmd_scan_g,
    cmd_train,
    cmd_variability,
)

EXIT_OK, EXIT_CONFIG, EXIT_ORACLE = 0, 2, 3
COMMANDS = ("train", "scan-g", "ieta", "otoc", "entropy", "fisher", "hidden-density", "variability")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rbmscramble", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON experiment config")
    ap.add_argument("--seed", type=int, help="master seed (overrides config)")
    ap.add_argument("--out", help="output directory (overrides config)")
    ap.add_argument("--rdm-mode", choices=("exact", "gibbs"))
    ap.add_argument("--alpha", type=float, help="hidden-node density p/n")
    ap.add_argument("--checkpoint", help="parameter checkpoint for ieta/otoc")
    ap.add_argument("--pair", type=int, nargs=2, metavar=("K", "M"), default=(0, 0))
    ap.add_argument("--workers", type=int, help="process-pool size for independent runs")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["output_dir"] = args.out
    if args.rdm_mode is not None:
        overrides["rdm_mode"] = args.rdm_mode
    if args.alpha is not None:
        overrides["alpha"] = args.alpha
    if args.workers is not None:
        overrides["workers"] = args.workers
    return replace(cfg, **overrides) if overrides else cfg


def run(args) -> int:
    cfg = load_config(args)
    cmd = args.command
    if cmd in ("ieta", "otoc") and not args.checkpoint:
        raise ConfigError(f"{cmd} requires --checkpoint")
    if cmd == "train":
        out = cmd_train(cfg)
    elif cmd == "scan-g":
        out = cmd_scan_g(cfg)
    elif cmd == "fisher":
        out = cmd_fisher(cfg)
    elif cmd == "ieta":
        out = cmd_ieta(cfg, args.checkpoint)
    elif cmd == "otoc":
        out = cmd_otoc(cfg, args.checkpoint, tuple(args.pair))
    elif cmd == "entropy":
        out = cmd_entropy(cfg)
    elif cmd == "variability":
        out = cmd_variability(cfg)
    else:
        out = cmd_hidden_density(cfg)
    print(out)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return run(args)
    except OracleSizeError as exc:
        print(f"oracle size error: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except (ConfigError, DriverError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
