"""Command-line entry point: ``edgetoll {channel-benefit,cost-min,integration}``.

Exit codes: 0 success, 1 an invariant failed, 2 usage error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from edgetoll import harness
from edgetoll.harness import ConfigError, ExperimentConfig

EXIT_OK, EXIT_INVARIANT, EXIT_USAGE = 0, 1, 2

# CLI flag -> config field; list-valued flags take several values
_LIST_FLAGS = {
    "task_counts": int,
    "block_intervals_s": float,
    "gas_prices_gwei": int,
    "edge_counts": int,
    "price_scheme": int,
}
_SCALAR_FLAGS = {
    "repetitions": int,
    "t_service_s": float,
    "benefit_edges": int,
    "benefit_scheme": int,
    "edge_deposit_ether": str,
    "default_interval_s": float,
    "default_gas_price_gwei": int,
    "transfer_gas": int,
    "open_gas": int,
    "close_gas": int,
    "jobs": int,
}


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with ExperimentConfig fields")
    common.add_argument("--seed", type=_u64)
    common.add_argument("--out", dest="output_path", help="CSV destination (default: stdout)")
    common.add_argument("-v", "--verbose", action="store_true")
    for name, kind in _LIST_FLAGS.items():
        common.add_argument("--" + name.replace("_", "-"), type=kind, nargs="+")
    for name, kind in _SCALAR_FLAGS.items():
        common.add_argument("--" + name.replace("_", "-"), type=kind)

    parser = argparse.ArgumentParser(prog="edgetoll", description="Payment-channel toll testbed experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    bench = sub.add_parser("channel-benefit", parents=[common],
                           help="completion time and gas with and without a payment channel")
    bench.add_argument("--measure", choices=["both", "time", "gas"], default=None,
                       help="which rows to produce (default: both)")
    sub.add_parser("cost-min", parents=[common], help="savings of greedy edge choice over random choice")
    integ = sub.add_parser("integration", parents=[common], help="proxy, edges and terminal over local sockets")
    integ.add_argument("--tasks", type=int, default=5)
    integ.add_argument("--edges", type=int, default=3)
    integ.add_argument("--no-forgery", action="store_true", help="skip the forged-agreement injection")
    return parser


def config_from_args(args) -> ExperimentConfig:
    experiment = {"channel-benefit": "channel_benefit", "cost-min": "cost_min",
                  "integration": "channel_benefit"}[args.command]
    measure = getattr(args, "measure", None)
    if measure in ("time", "gas"):
        experiment = f"channel_benefit_{measure}"
    overrides = {"experiment": experiment}
    for name in list(_LIST_FLAGS) + list(_SCALAR_FLAGS) + ["seed", "output_path"]:
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = tuple(value) if isinstance(value, list) else value
    if args.config:
        try:
            return ExperimentConfig.from_file(args.config, **overrides)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except ValueError as exc:
            raise ConfigError(f"bad config file: {exc}") from exc
    return ExperimentConfig.from_dict(overrides)


def _emit(text: str, path) -> None:
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        if args.command == "integration" and (args.tasks < 1 or args.edges < 1):
            raise ConfigError("--tasks and --edges must be positive")
    except ConfigError as exc:
        parser.print_usage(sys.stderr)
        print(f"edgetoll: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    if args.command == "integration":
        report = harness.run_integration(cfg, tasks=args.tasks, n_edges=args.edges,
                                         forge_after=None if args.no_forgery else min(3, args.tasks - 1) or None)
        _emit(report.to_csv(), cfg.output_path)
        failure = report.first_failure
        if failure is not None:
            print(f"invariant violated: {failure.name} (expected {failure.expected}, got {failure.actual})",
                  file=sys.stderr)
            return EXIT_INVARIANT
        return EXIT_OK

    if args.command == "channel-benefit":
        rows = harness.run_channel_benefit(cfg)
        problems = harness.check_channel_benefit(rows)
    else:
        rows = harness.run_cost_min(cfg)
        problems = harness.check_cost_min(rows)
    _emit(harness.write_csv(rows), cfg.output_path)
    for problem in problems:
        print(f"invariant violated: {problem}", file=sys.stderr)
    return EXIT_INVARIANT if problems else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
