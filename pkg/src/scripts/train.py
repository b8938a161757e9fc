#!/usr/bin/env python3
"""
Train the parallel network on an MPNF bundle.

Writes the final parameters to ``--out``, the best-validation parameters next
to it (``<name>.best.npz``) and one JSON line per epoch to stdout and to
``<out>.epochs.jsonl``.
"""
import argparse
import sys
from dataclasses import fields
from pathlib import Path
from typing import List

from ..data.bundle import read_bundle
from ..data.synth import check_labels
from ..model.mpn import ModelConfig
from ..model.params import save_params
from ..model.trainer import final_tau, train
from ..utils.config import EPOCH_LOG_SUFFIX, DatasetSpec, RunConfig, load_run_config
from ..utils.errors import EXIT_OK
from ..utils.logging_utils import epoch_logger, setup_logging
from .common import MODEL_KEYS, ArgumentParser, add_common_arguments, add_model_arguments, config_overrides, execute


def add_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", type=str, required=True, help="MPNF bundle")
    parser.add_argument("--out", type=str, required=True, help="Model file (.npz)")
    parser.add_argument("--progress", action="store_true", help="Show a progress bar over epochs")
    add_common_arguments(parser)
    add_model_arguments(parser)


def adopt_dataset_shape(config: RunConfig, spec: DatasetSpec) -> None:
    """Take every dataset field except the seed from the bundle header."""
    for f in fields(DatasetSpec):
        if f.name != 'seed':
            setattr(config.data, f.name, getattr(spec, f.name))


def model_path(out: str) -> Path:
    path = Path(out)
    return path if path.suffix == '.npz' else path.with_name(path.name + '.npz')


def best_model_path(out: str) -> Path:
    path = model_path(out)
    return path.with_name(path.stem + '.best.npz')


def _lines_at(config: RunConfig, tau: float) -> List[str]:
    """Config lines recording the temperature the saved parameters are scored at."""
    scored = config.copy()
    scored.train.eval_tau = tau
    return scored.to_lines()


def run(args: argparse.Namespace) -> int:
    setup_logging(args.log_file, args.quiet)
    config = load_run_config(args.config, config_overrides(args, MODEL_KEYS))
    dataset = read_bundle(args.data)
    adopt_dataset_shape(config, dataset.spec)
    train_split, val_split = dataset.split('train'), dataset.split('val')
    if config.train.regime == 'full':
        check_labels(train_split, dataset.spec.n_classes)
    model_config = ModelConfig.from_run(config)

    out = model_path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    epoch_log = epoch_logger(str(out) + EPOCH_LOG_SUFFIX)
    result = train(train_split, config, model_config, val_split, epoch_log, progress=args.progress)

    save_params(result.final_params, str(out), _lines_at(config, final_tau(config)))
    save_params(result.best_params, str(best_model_path(args.out)), _lines_at(config, result.best_tau))
    print(f"# best_epoch={result.best_epoch} best_val_accuracy={result.best_val_accuracy}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = ArgumentParser(description="Train the multimodal parallel network")
    add_arguments(parser)
    return execute(run, parser.parse_args(argv))


if __name__ == "__main__":
    sys.exit(main())
