"""
Logging setup: console and optional log file, plus a line-delimited epoch stream.
"""

import json
import logging
import sys
from typing import Optional

EPOCH_LOGGER = 'mpn.epochs'
LOG_FORMAT = '%(asctime)s - %(levelname)s - %(name)s - %(message)s'


def setup_logging(log_file: Optional[str] = None, quiet: bool = False) -> None:
    """Configure the root logger with stdout and, if given, a file handler."""
    handlers = [logging.StreamHandler(sys.stdout)]
    if log_file:
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(
        level=logging.WARNING if quiet else logging.INFO,
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )


def epoch_logger(jsonl_file: Optional[str] = None, stream=None) -> logging.Logger:
    """Logger that writes one bare JSON record per line to stdout and ``jsonl_file``."""
    logger = logging.getLogger(EPOCH_LOGGER)
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()
    logger.setLevel(logging.INFO)
    logger.propagate = False
    plain = logging.Formatter('%(message)s')
    console = logging.StreamHandler(stream or sys.stdout)
    console.setFormatter(plain)
    logger.addHandler(console)
    if jsonl_file:
        file_handler = logging.FileHandler(jsonl_file, mode='w')
        file_handler.setFormatter(plain)
        logger.addHandler(file_handler)
    return logger


def log_record(logger: logging.Logger, record: dict) -> None:
    logger.info(json.dumps(record, sort_keys=True))
