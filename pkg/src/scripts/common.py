"""
Helpers shared by the command scripts: argument parsing, error reporting and config flags.
"""

import argparse
import logging
import sys
from typing import Callable, Dict, Optional

from ..utils.errors import EXIT_USAGE, MpnError

logger = logging.getLogger(__name__)


class ArgumentParser(argparse.ArgumentParser):
    """argparse parser that exits with the usage code (1) on bad arguments."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def execute(run: Callable[[argparse.Namespace], int], args: argparse.Namespace) -> int:
    """Run a command, turning package errors into their exit codes."""
    try:
        return run(args)
    except MpnError as e:
        print(f"error: {e}", file=sys.stderr)
        logger.debug("command failed", exc_info=True)
        return e.exit_code


def add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=str, default=None, help="key=value configuration file")
    parser.add_argument("--seed", type=int, default=None, help="Seed for data, initialisation and shuffling")
    parser.add_argument("--log-file", type=str, default=None, help="Also write log messages to this file")
    parser.add_argument("--quiet", action="store_true", help="Only log warnings and errors")


def add_model_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--regime", type=str, default=None, help="full or weak supervision")
    parser.add_argument("--epochs", type=int, default=None, help="Training epochs")
    parser.add_argument("--lambda", dest="loss_lambda", type=float, default=None,
                        help="Weight of the relevance loss (default 0.6)")
    parser.add_argument("--lr", dest="learning_rate", type=float, default=None, help="Adam learning rate")
    parser.add_argument("--batch-size", type=int, default=None, help="Videos per mini-batch")
    parser.add_argument("--network", type=str, default=None, help="localization, classification or parallel")
    parser.add_argument("--mcm-order", type=str, default=None, help="SA+SA, CMA+CMA, CMA+SA or SA+CMA")
    parser.add_argument("--squeeze", type=str, default=None, help="concat, product, addition or fbc")
    parser.add_argument("--no-local-to-global", dest="local_to_global", action="store_const", const=False,
                        default=None, help="Do not gate co-attention outputs with the localization gates")


def config_overrides(args: argparse.Namespace, keys) -> Dict[str, Optional[object]]:
    """Flag values for the given config keys; missing attributes count as unset."""
    return {key: getattr(args, key, None) for key in keys}


MODEL_KEYS = ('seed', 'regime', 'epochs', 'loss_lambda', 'learning_rate', 'batch_size',
              'network', 'mcm_order', 'squeeze', 'local_to_global')
