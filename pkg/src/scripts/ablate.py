#!/usr/bin/env python3
"""
Ablation runs: train one model per architecture setting and regime, then
compare test accuracy in a tab-separated table.

Every run shares the training seed (or the same list of seeds with
``--seeds``), so rows differ only by architecture.
"""
import argparse
import logging
import sys
from typing import Dict, List, Tuple

import numpy as np
import pandas as pd

from ..data.bundle import read_bundle
from ..data.exporter import format_table, write_table
from ..model.mpn import ModelConfig
from ..model.trainer import evaluate, train
from ..utils.config import MCM_ORDERS, NETWORKS, REGIMES, SQUEEZE_VARIANTS, RunConfig, load_run_config
from ..utils.errors import EXIT_OK, ConfigError
from ..utils.logging_utils import setup_logging
from .common import MODEL_KEYS, ArgumentParser, add_common_arguments, config_overrides, execute
from .train import adopt_dataset_shape

logger = logging.getLogger(__name__)

AXES: Dict[str, Tuple[str, List]] = {
    'network': ('network', list(NETWORKS)),
    'mcm': ('mcm_order', list(MCM_ORDERS)),
    'squeeze': ('squeeze', list(SQUEEZE_VARIANTS)),
    'interaction': ('local_to_global', [False, True]),
    'depth': ('n_mcm', [1, 2, 3]),
}


def add_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", type=str, required=True, help="MPNF bundle")
    parser.add_argument("--axis", type=str, required=True, help=f"One of {', '.join(AXES)}")
    parser.add_argument("--seeds", type=int, default=1, help="Average every row over this many seeds")
    parser.add_argument("--epochs", type=int, default=None, help="Training epochs per run")
    parser.add_argument("--out", type=str, default=None, help="Also write the table to this file")
    add_common_arguments(parser)


def run_setting(dataset, config: RunConfig) -> float:
    """Train with ``config`` and return test accuracy of the best-validation parameters."""
    model_config = ModelConfig.from_run(config)
    result = train(dataset.split('train'), config, model_config, dataset.split('val'))
    scored = evaluate(dataset.split('test'), result.best_params, model_config, result.best_tau,
                      config.train.regime, config.train.threshold)
    return scored.accuracy


def ablation_table(dataset, base: RunConfig, axis: str, n_seeds: int = 1) -> pd.DataFrame:
    """One row per setting of ``axis`` with the mean accuracy of each regime.

    Raises:
        ConfigError: For an unknown axis or a non-positive seed count
    """
    if axis not in AXES:
        raise ConfigError(f"unknown ablation axis {axis!r}, expected one of {sorted(AXES)}")
    if n_seeds < 1:
        raise ConfigError(f"--seeds must be >= 1, got {n_seeds}")
    key, settings = AXES[axis]
    seeds = [base.train.seed + i for i in range(n_seeds)]
    rows = []
    for setting in settings:
        row = {'axis': axis, 'setting': str(setting).lower() if isinstance(setting, bool) else setting}
        for regime in REGIMES:
            scores = []
            for seed in seeds:
                config = base.copy()
                config.set(key, setting)
                config.set('regime', regime)
                config.train.seed = seed
                config.validate()
                scores.append(run_setting(dataset, config))
                logger.info("%s=%s regime=%s seed=%d accuracy=%.4f", key, setting, regime, seed, scores[-1])
            row[regime] = float(np.mean(scores))
            if n_seeds > 1:
                row[f'{regime}_std'] = float(np.std(scores))
        rows.append(row)
    return pd.DataFrame(rows)


def run(args: argparse.Namespace) -> int:
    setup_logging(args.log_file, args.quiet)
    base = load_run_config(args.config, config_overrides(args, MODEL_KEYS))
    if args.axis not in AXES:
        raise ConfigError(f"unknown ablation axis {args.axis!r}, expected one of {sorted(AXES)}")
    dataset = read_bundle(args.data)
    adopt_dataset_shape(base, dataset.spec)
    table = ablation_table(dataset, base, args.axis, args.seeds)
    print(format_table(table), end='')
    if args.out:
        write_table(table, args.out, base.to_lines())
    return EXIT_OK


def main(argv=None) -> int:
    parser = ArgumentParser(description="Compare architecture variants of the parallel network")
    add_arguments(parser)
    return execute(run, parser.parse_args(argv))


if __name__ == "__main__":
    sys.exit(main())
