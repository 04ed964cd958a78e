"""Command-line entry point.

Exit codes: 0 on success, 2 on configuration errors, 3 on stage failures.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, ExperimentConfig
from .pipeline import STAGES, StageError, run_pipeline, run_stage

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STAGE = 3

COMMANDS = (
    "select-features",
    "collect",
    "train-predictor",
    "eval-predictor",
    "train-agent",
    "evaluate",
    "compare",
    "emit-plots",
    "run-pipeline",
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qosalloc",
        description="QoS-prediction-guided resource allocation: simulator, predictor, controllers, and evaluation harness.",
    )
    parser.add_argument("command", choices=COMMANDS, help="pipeline stage or full run")
    parser.add_argument("--config", default=None, help="path to the experiment config JSON (defaults apply when omitted)")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--out", default=None, help="override the output directory")
    parser.add_argument("-v", "--verbose", action="store_true", help="info-level logging")
    return parser


def load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig.from_dict({})
    if args.seed is not None:
        cfg.raw["seed"] = args.seed
    if args.out is not None:
        cfg.raw["out_dir"] = args.out
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "run-pipeline":
            run_pipeline(cfg)
        else:
            run_stage(cfg, args.command)
    except StageError as e:
        print(f"stage failure: {e}", file=sys.stderr)
        return EXIT_STAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
