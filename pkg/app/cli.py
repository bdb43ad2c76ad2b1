"""Command line interface: `python -m app <command>`."""

import argparse
import json
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

from app.config import settings
from app.core.exceptions import SimulationError
from app.main import setup_logging
from app.models.experiment import ExperimentConfig, load_experiment_config
from app.models.reports import ClusteringMethod
from app.services.experiment_service import ExperimentService

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config",
        type=Path,
        default=settings.default_config,
        help="Experiment TOML file (default: %(default)s)",
    )
    common.add_argument("--seed", type=int, default=None, help="Override the master seed")
    common.add_argument(
        "--output-dir",
        type=Path,
        default=settings.output_dir,
        help="Directory for reports, histories and checkpoints (default: %(default)s)",
    )
    common.add_argument(
        "--dataset",
        type=Path,
        default=None,
        help="Saved dataset.json to use instead of regenerating from the seed",
    )
    common.add_argument("--log-level", default=None, help="Override LOG_LEVEL")

    parser = argparse.ArgumentParser(
        prog="cfsim", description="Cell-free massive MIMO clustering experiments"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("baseline", parents=[common], help="Evaluate the pilot-based heuristic")

    sub.add_parser("train", parents=[common], help="Train the LSTM clustering policy")

    evaluate = sub.add_parser("eval", parents=[common], help="Evaluate a clustering method")
    evaluate.add_argument("--checkpoint", type=Path, default=None)
    evaluate.add_argument(
        "--method",
        choices=[m.value for m in ClusteringMethod],
        default=ClusteringMethod.POLICY.value,
    )

    validate = sub.add_parser(
        "validate", parents=[common], help="Monte-Carlo estimation and gradient checks"
    )
    validate.add_argument("--trials", type=int, default=100_000)

    dataset = sub.add_parser("dataset", parents=[common], help="Generate and describe the dataset")
    dataset.add_argument("--save", action="store_true", help="Write dataset.json to the output dir")
    dataset.add_argument(
        "--load", dest="dataset", type=Path, help="Describe a saved dataset.json (same as --dataset)"
    )

    conn_map = sub.add_parser("map", parents=[common], help="Export a connection map")
    conn_map.add_argument("--location", type=int, default=0)
    conn_map.add_argument(
        "--method",
        choices=[m.value for m in ClusteringMethod],
        default=ClusteringMethod.BASELINE.value,
    )
    conn_map.add_argument("--checkpoint", type=Path, default=None)
    conn_map.add_argument(
        "--representative",
        action="store_true",
        help="Map the location whose SE sum is closest to the mean (overrides --location)",
    )
    conn_map.add_argument(
        "--dump-beta", action="store_true", help="Also write the location's linear beta matrix"
    )
    return parser


def _load_config(args: argparse.Namespace) -> ExperimentConfig:
    return load_experiment_config(args.config).with_seed(args.seed)


def _print(payload: dict) -> None:
    print(json.dumps(payload, indent=2, default=str))


def run(args: argparse.Namespace) -> int:
    service = ExperimentService(_load_config(args))
    output_dir: Path = args.output_dir
    if args.dataset is not None:
        service.load_dataset(args.dataset)

    if args.command == "baseline":
        report, paths = service.evaluate_to_dir(ClusteringMethod.BASELINE, output_dir)
        print(f"mean SE sum: {report.mean_se_sum:.4f} bit/s/Hz")
        print(f"mean connections: {report.mean_connections:.2f}")
        print(f"report: {paths['records']}")
        return 0

    if args.command == "eval":
        method = ClusteringMethod(args.method)
        report, paths = service.evaluate_to_dir(method, output_dir, args.checkpoint)
        _print({**report.summary(), "report": paths["records"]})
        return 0

    if args.command == "train":
        _, history, final_path = service.train(output_dir)
        last = history[-1]
        _print(
            {
                "epochs": len(history),
                "final_mean_reward": last.mean_reward,
                "final_mean_se_sum": last.mean_se_sum,
                "final_mean_connections": last.mean_connections,
                "checkpoint": final_path,
            }
        )
        return 0

    if args.command == "validate":
        report = service.validate(trials=args.trials)
        print(f"max MC relative error: {report.mc_max_relative_error:.5f}")
        print(f"max gradient relative error: {report.gradient_max_relative_error:.3e}")
        print("PASSED" if report.passed else "FAILED")
        return 0 if report.passed else 1

    if args.command == "dataset":
        description = service.describe_dataset()
        if args.save:
            description["path"] = service.dataset().save(output_dir / "dataset.json")
        _print(description)
        return 0

    if args.command == "map":
        method = ClusteringMethod(args.method)
        location = args.location
        if args.representative:
            location = service.representative_location(method, args.checkpoint)
            print(f"representative location: {location}")
        path = output_dir / f"map_{method.value}_{location:04d}.txt"
        beta_path = output_dir / f"beta_{location:04d}.csv" if args.dump_beta else None
        written, clusters = service.export_connection_map(
            location, method, path, args.checkpoint, beta_path
        )
        print(f"{clusters.connections} links written to {written}")
        if beta_path is not None:
            print(f"beta written to {beta_path}")
        return 0

    raise SimulationError(f"unknown command {args.command}")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level)
    try:
        return run(args)
    except SimulationError as e:
        logger.debug("command failed", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
