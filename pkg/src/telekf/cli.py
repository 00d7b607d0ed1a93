"""Command-line front end.

Commands: identify, validate, sweep, impair, calibrate-accuracy.
Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from . import pipeline
from .errors import ConfigError, DataError, NumericalError


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON experiment config file")
    p.add_argument("--dataset", help="identification dataset CSV")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--metric", help="accuracy metric definition")
    p.add_argument("--dt", type=float, help="sample period in seconds")
    p.add_argument("--block-rows", type=int, dest="block_rows",
                   help="Hankel block rows (default 20)")
    p.add_argument("--order", type=int, dest="fixed_order",
                   help="force a fixed model order")
    p.add_argument("--burn-in", type=int, dest="burn_in",
                   help="samples excluded from error metrics")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="telekf",
        description="Identify teleoperator dynamics and estimate slave-side "
                    "positions through an impaired network channel.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("identify", help="identify a state-space model")
    _add_common(p)

    p = sub.add_parser("validate", help="score a model on held-out data")
    _add_common(p)
    p.add_argument("--validation-dataset", dest="validation_dataset",
                   help="validation dataset CSV")
    p.add_argument("--model", dest="model_path", help="saved model JSON")

    p = sub.add_parser("sweep", help="run the network scenario sweep")
    _add_common(p)
    p.add_argument("--model", dest="model_path", help="saved model JSON")
    p.add_argument("--scenarios", dest="scenarios_file",
                   help="scenario list JSON (default: canonical suite)")
    p.add_argument("--sample-delay-range", action="store_true",
                   dest="sample_delay_range",
                   help="draw ranged delays per sample instead of midpoint")

    p = sub.add_parser("impair", help="channel-only dry run")
    _add_common(p)
    p.add_argument("--scenario-index", type=int, default=0,
                   dest="scenario_index")
    p.add_argument("--scenarios", dest="scenarios_file",
                   help="scenario list JSON (default: canonical suite)")

    p = sub.add_parser("calibrate-accuracy",
                       help="score accuracy formulas against published pairs")
    _add_common(p)
    return parser


_OVERRIDES = ("dataset", "validation_dataset", "model_path", "dt",
              "block_rows", "fixed_order", "burn_in", "sample_delay_range")


def config_from_args(args: argparse.Namespace) -> pipeline.ExperimentConfig:
    if getattr(args, "config", None):
        config = pipeline.ExperimentConfig.from_file(args.config)
    else:
        config = pipeline.ExperimentConfig()
    updates = {}
    for name in _OVERRIDES:
        value = getattr(args, name, None)
        if value is not None and value is not False:
            updates[name] = value
    if getattr(args, "out", None):
        updates["out_dir"] = args.out
    if getattr(args, "seed", None) is not None:
        updates["master_seed"] = args.seed
    if getattr(args, "metric", None):
        updates["metric_def"] = args.metric
    if getattr(args, "fixed_order", None):
        updates["order_criterion"] = "fixed"
    if getattr(args, "scenarios_file", None):
        with open(args.scenarios_file) as f:
            updates["scenarios"] = json.load(f)
    return dataclasses.replace(config, **updates)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = config_from_args(args)
        if args.command == "identify":
            result = pipeline.cmd_identify(config)
            print(f"order {result['order']}, model written to "
                  f"{result['paths']['model']}")
        elif args.command == "validate":
            result = pipeline.cmd_validate(config)
            report = result["report"]
            accs = ", ".join(f"{a:.2f}%" for a in report.accuracy_pct)
            print(f"validation accuracy: {accs} "
                  f"({report.metric_def}); report at "
                  f"{result['paths']['report']}")
        elif args.command == "sweep":
            result = pipeline.cmd_sweep(config)
            print(f"sweep summary written to {result['summary']}")
        elif args.command == "impair":
            result = pipeline.cmd_impair(
                config, scenario_index=args.scenario_index)
            print(f"impaired stream written to {result['path']}")
        elif args.command == "calibrate-accuracy":
            result = pipeline.cmd_calibrate_accuracy(config)
            best = result["result"]["best"]
            print(f"best-fitting accuracy formula: {best} "
                  f"(ranking at {result['path']})")
        else:  # pragma: no cover
            parser.error(f"unknown command {args.command}")
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
