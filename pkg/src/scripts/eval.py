#!/usr/bin/env python3
"""
Evaluate a trained model on one split of an MPNF bundle.

Prints a ``metric<TAB>value`` table with the overall segment accuracy, the
nearest-prototype oracle and the all-background baseline on the same split.
"""
import argparse
import sys

import pandas as pd

from ..data.bundle import read_bundle
from ..data.exporter import export_predictions, format_table
from ..data.synth import nearest_prototype_oracle
from ..model.metrics import background_baseline, overall_accuracy
from ..model.mpn import ModelConfig, init_model_params
from ..model.params import load_params, read_config_lines
from ..model.trainer import evaluate, scoring_tau
from ..utils.config import RunConfig
from ..utils.errors import EXIT_OK, ConfigError
from ..utils.logging_utils import setup_logging
from ..utils.rng import Rng
from .common import ArgumentParser, execute


def add_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", type=str, required=True, help="MPNF bundle")
    parser.add_argument("--model", type=str, required=True, help="Model file written by train")
    parser.add_argument("--split", type=str, default="test", help="train, val or test")
    parser.add_argument("--dump-preds", type=str, default=None, help="Write per-segment predictions here")
    parser.add_argument("--regime", type=str, default=None, help="Decoding regime (defaults to the training regime)")
    parser.add_argument("--threshold", type=float, default=None, help="Relevance threshold (default 0.5)")
    parser.add_argument("--quiet", action="store_true", help="Only log warnings and errors")


def config_from_model(path: str) -> RunConfig:
    """Rebuild the run configuration embedded in a model file."""
    config = RunConfig()
    for line in read_config_lines(path):
        if '=' not in line:
            raise ConfigError(f"malformed config line {line!r} in {path}")
        key, value = line.split('=', 1)
        config.set(key, value)
    return config


def run(args: argparse.Namespace) -> int:
    setup_logging(quiet=args.quiet)
    config = config_from_model(args.model)
    if args.regime is not None:
        config.set('regime', args.regime)
    if args.threshold is not None:
        config.set('threshold', args.threshold)
    config.validate()

    dataset = read_bundle(args.data)
    model_config = ModelConfig.from_run(config, dataset.spec)
    params = init_model_params(model_config, Rng(config.train.seed))
    load_params(args.model, params)

    samples = dataset.split(args.split)
    result = evaluate(samples, params, model_config, scoring_tau(config), config.train.regime, config.train.threshold)
    oracle = nearest_prototype_oracle(samples, dataset.spec)
    n_classes = dataset.spec.n_classes
    table = pd.DataFrame({
        'metric': ['accuracy', 'oracle_accuracy', 'background_baseline', 'videos', 'segments'],
        'value': [result.accuracy, overall_accuracy(oracle, result.truth),
                  background_baseline(result.truth, n_classes), len(samples), result.truth.size],
    })
    print(format_table(table), end='')
    if args.dump_preds:
        export_predictions(result, n_classes, args.dump_preds, config.to_lines())
    return EXIT_OK


def main(argv=None) -> int:
    parser = ArgumentParser(description="Evaluate a trained model")
    add_arguments(parser)
    return execute(run, parser.parse_args(argv))


if __name__ == "__main__":
    sys.exit(main())
