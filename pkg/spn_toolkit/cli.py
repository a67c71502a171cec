#!/usr/bin/env python3
"""
spn_toolkit/cli.py — Command line: train → complete / eval / validate, plus the nearest-neighbor baseline.

Subcommands:
    train        generate the image architecture, learn its weights, write a model file
    complete     occlude one side of each image, complete it by MPE, print MSE lines
    validate     print the validity report of a model file
    eval         print the average log-likelihood of a dataset under a model
    baseline-nn  nearest-neighbor completion MSE of a test set against a training set

Note: On success every subcommand calls sys.exit(0); SpnError diagnostics
exit with 1 and usage errors with 2.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from spn_toolkit.completion import (
    CompletionTask,
    OcclusionSide,
    complete_and_score,
    mse_report_lines,
    nn_baseline_report,
)
from spn_toolkit.exceptions.spn_errors import InputError, SpnError
from spn_toolkit.inference import MpeMode
from spn_toolkit.learning import TrainConfig, TrainMode, average_log_likelihood, train
from spn_toolkit.parsers.image_files import load_dataset, write_csv_image
from spn_toolkit.parsers.model_file import ModelFile, read_model, write_model
from spn_toolkit.structure import ImageArchConfig, generate_image_spn, init_gaussian_leaves

# Arguments that must name an existing file or directory
INPUT_PATHS = ("data", "model", "train_data", "test_data")


def setup_logging(verbose: bool):
    """
    Configure root logger. DEBUG level if verbose, else INFO.
    """
    level = logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(
        format="%(asctime)s %(levelname)s: %(message)s", level=level
    )


def _check_image_model(model: ModelFile, width: int, height: int) -> None:
    if (model.width, model.height) != (width, height):
        raise InputError(
            f"Model was trained on {model.width}x{model.height} images; dataset images are {width}x{height}"
        )


def run_train(args: argparse.Namespace) -> List[str]:
    dataset = load_dataset(args.data, allow_constant=args.allow_constant)
    arch = ImageArchConfig(
        width=dataset.width,
        height=dataset.height,
        m=args.m,
        k_sums=args.k_sums,
        k_components=args.components,
        max_edges=args.max_edges,
    )
    config = TrainConfig(
        mode=args.mode,
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        threshold=args.threshold,
        max_epochs=args.max_epochs,
        l0_penalty=args.l0_penalty,
        l1_penalty=args.l1_penalty,
        alpha=args.alpha,
        seed=args.seed,
    )
    logging.info("Loaded %d image(s) of %dx%d from %s", len(dataset), dataset.width, dataset.height, args.data)
    spn = generate_image_spn(arch, init_gaussian_leaves(dataset.pixels, args.components))
    logging.info("Generated architecture: %d nodes, %d edges", len(spn), spn.num_edges)
    trained, log = train(spn, dataset.pixels, config)
    write_model(args.output, ModelFile(trained, dataset.width, dataset.height))
    logging.info("Model written to %s", args.output)
    final = log.epochs[-1].avg_ll if log.epochs else log.initial_avg_ll
    return [f"epochs={len(log.epochs)} converged={str(log.converged).lower()} avg_ll={final:.6f}"]


def run_complete(args: argparse.Namespace) -> List[str]:
    model = read_model(args.model)
    dataset = load_dataset(args.data, allow_constant=args.allow_constant)
    _check_image_model(model, dataset.width, dataset.height)
    report = complete_and_score(model.spn, dataset, CompletionTask(side=args.side, mode=args.mpe_mode))
    if args.output:
        args.output.mkdir(parents=True, exist_ok=True)
        for result in report.results:
            if result.completed is not None:
                path = args.output / f"completion_{result.index:04d}.csv"
                write_csv_image(path, dataset.restore(result.index, result.completed))
        logging.info("Completions written to %s", args.output)
    return mse_report_lines(report)


def run_validate(args: argparse.Namespace) -> List[str]:
    report = read_model(args.model).spn.validity
    args.status = 0 if report.valid else 1
    for violation in report.violations:
        logging.debug("Node %d: %s over variables %s", violation.node, violation.kind.value,
                      sorted(violation.variables))
    return [report.summary()]


def run_eval(args: argparse.Namespace) -> List[str]:
    model = read_model(args.model)
    dataset = load_dataset(args.data, allow_constant=args.allow_constant)
    _check_image_model(model, dataset.width, dataset.height)
    return [f"avg_ll={average_log_likelihood(model.spn, dataset.pixels):.6f}"]


def run_baseline(args: argparse.Namespace) -> List[str]:
    train_set = load_dataset(args.train_data, allow_constant=args.allow_constant)
    test_set = load_dataset(args.test_data, allow_constant=args.allow_constant)
    return mse_report_lines(nn_baseline_report(train_set, test_set, CompletionTask(side=args.side)))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spn",
        description="Sum-product networks: train on images, complete occlusions, validate and evaluate models"
    )
    parser.add_argument(
        "--verbose", "-v", action="store_true",
        help="Enable verbose (DEBUG) logging"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def data_flags(p: argparse.ArgumentParser):
        p.add_argument(
            "--allow-constant", action="store_true",
            help="Turn constant images into zero images instead of failing"
        )

    p = sub.add_parser("train", help="Learn an image SPN and write a model file")
    p.add_argument("--data", required=True, type=Path, help="Image file or directory (.pgm/.csv)")
    p.add_argument("--output", "-o", required=True, type=Path, help="Model file to write")
    p.add_argument("--m", type=int, default=4, help="Coarse resolution (default: 4)")
    p.add_argument("--k-sums", type=int, default=20, help="Sum nodes per region (default: 20)")
    p.add_argument("--components", type=int, default=4, help="Gaussian leaves per pixel (default: 4)")
    p.add_argument("--max-edges", type=int, default=10_000_000, help="Refuse larger architectures")
    p.add_argument("--mode", choices=[m.value for m in TrainMode], default=TrainMode.HARD_EM.value)
    p.add_argument("--batch-size", type=int, default=50)
    p.add_argument("--threshold", type=float, default=0.1, help="Stop when avg_ll improves by less")
    p.add_argument("--max-epochs", type=int, default=50)
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--l0-penalty", type=float, default=1.0)
    p.add_argument("--l1-penalty", type=float, default=0.0)
    p.add_argument("--alpha", type=float, default=1.0, help="Count smoothing (default: add-one)")
    p.add_argument("--seed", type=int, default=0)
    data_flags(p)
    p.set_defaults(handler=run_train)

    p = sub.add_parser("complete", help="Complete occluded images and report MSE")
    p.add_argument("--model", required=True, type=Path)
    p.add_argument("--data", required=True, type=Path)
    p.add_argument("--side", choices=[s.value for s in OcclusionSide], default=OcclusionSide.LEFT.value)
    p.add_argument("--mpe-mode", choices=[m.value for m in MpeMode], default=MpeMode.SUM_UP_MAX_DOWN.value)
    p.add_argument("--output", "-o", type=Path, help="Directory for completed images (CSV)")
    data_flags(p)
    p.set_defaults(handler=run_complete)

    p = sub.add_parser("validate", help="Check completeness, consistency and decomposability")
    p.add_argument("--model", required=True, type=Path)
    p.set_defaults(handler=run_validate)

    p = sub.add_parser("eval", help="Average log-likelihood of a dataset")
    p.add_argument("--model", required=True, type=Path)
    p.add_argument("--data", required=True, type=Path)
    data_flags(p)
    p.set_defaults(handler=run_eval)

    p = sub.add_parser("baseline-nn", help="Nearest-neighbor completion baseline")
    p.add_argument("--train-data", required=True, type=Path)
    p.add_argument("--test-data", required=True, type=Path)
    p.add_argument("--side", choices=[s.value for s in OcclusionSide], default=OcclusionSide.LEFT.value)
    data_flags(p)
    p.set_defaults(handler=run_baseline)
    return parser


def main(argv: Optional[Sequence[str]] = None):
    parser = build_parser()
    args = parser.parse_args(argv)

    setup_logging(args.verbose)

    for name in INPUT_PATHS:
        path = getattr(args, name, None)
        if path is not None and not path.exists():
            parser.error(f"--{name.replace('_', '-')}: no such file or directory: {path}")

    try:
        lines = args.handler(args)
    except SpnError as e:
        logging.error("%s", e)
        sys.exit(1)
    except OSError as e:
        logging.error("I/O error: %s", e)
        sys.exit(1)

    for line in lines:
        print(line)

    # validate reports an invalid model through its exit status
    sys.exit(getattr(args, "status", 0))


if __name__ == "__main__":
    main()
