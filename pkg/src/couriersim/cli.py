"""Command line entry points.

Exit codes: 0 success, 2 configuration error, 3 runtime failure,
4 validation failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .config import ConfigError, ExperimentConfig, load_config
from .harness import run_experiment, sweep, validate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_VALIDATION = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="couriersim",
        description="Deterministic multi-agent courier delivery simulator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment")
    run_p.add_argument("--config", help="JSON config file (defaults used if omitted)")
    run_p.add_argument("--out", required=True, help="output directory")
    run_p.add_argument("--seed", type=int, help="override the config seed")
    run_p.add_argument("--steps", type=int, help="override the step count")

    sweep_p = sub.add_parser("sweep", help="run a config matrix")
    sweep_p.add_argument("--config", help="base JSON config file")
    sweep_p.add_argument("--out", required=True, help="output directory")
    sweep_p.add_argument("--seeds", type=int, default=0,
                         help="run seeds 0..N-1 (0 keeps the base seed)")
    sweep_p.add_argument("--learnings", help="comma-separated learning types")
    sweep_p.add_argument("--memory-models", help="comma-separated memory models")

    val_p = sub.add_parser("validate", help="run built-in self checks")
    val_p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {}
    for name in ("seed", "steps"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
        cfg.validate()
    return cfg


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = _load(args)
        elif args.command == "sweep":
            cfg = _load(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "run":
            result = run_experiment(cfg, args.out)
            print(f"wrote {result.agent_csv} and {result.system_csv}")
            return EXIT_OK
        if args.command == "sweep":
            seeds = list(range(args.seeds)) if args.seeds else None
            learnings = args.learnings.split(",") if args.learnings else None
            models = args.memory_models.split(",") if args.memory_models else None
            try:
                summary = sweep(cfg, args.out, seeds=seeds,
                                learnings=learnings, memory_models=models)
            except ConfigError as exc:
                print(f"config error: {exc}", file=sys.stderr)
                return EXIT_CONFIG
            print(f"wrote {summary}")
            return EXIT_OK
        if args.command == "validate":
            ok, lines = validate(verbose=args.verbose)
            print("\n".join(lines))
            return EXIT_OK if ok else EXIT_VALIDATION
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
