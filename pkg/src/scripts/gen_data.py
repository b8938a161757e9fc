#!/usr/bin/env python3
"""
Generate a synthetic audio-visual event dataset and write it as an MPNF bundle.
"""
import argparse
import sys

from ..data.bundle import manifest_path, write_bundle
from ..data.exporter import class_summary, format_table
from ..data.synth import generate
from ..utils.config import BUNDLE_SUFFIX, DATA_DIR, load_run_config
from ..utils.errors import EXIT_OK
from ..utils.logging_utils import setup_logging
from .common import ArgumentParser, execute

DEFAULT_OUT = f"{DATA_DIR}/synthetic{BUNDLE_SUFFIX}"


def add_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--spec", type=str, default=None, help="key=value file with dataset settings")
    parser.add_argument("--out", type=str, default=DEFAULT_OUT, help="Bundle path")
    parser.add_argument("--seed", type=int, default=None, help="Dataset seed")
    parser.add_argument("--noise", dest="noise_sigma", type=float, default=None, help="Noise standard deviation")
    parser.add_argument("--n-videos", type=int, default=None, help="Number of videos")
    parser.add_argument("--quiet", action="store_true", help="Only log warnings and errors")


def run(args: argparse.Namespace) -> int:
    setup_logging(quiet=args.quiet)
    config = load_run_config(args.spec, {
        'seed': args.seed,
        'noise_sigma': args.noise_sigma,
        'n_videos': args.n_videos,
    })
    dataset = generate(config.data)
    bundle = write_bundle(dataset, args.out, config.to_lines())
    print(f"# bundle={bundle}")
    print(f"# manifest={manifest_path(bundle)}")
    print(format_table(class_summary(dataset)), end='')
    return EXIT_OK


def main(argv=None) -> int:
    parser = ArgumentParser(description="Generate a synthetic MPNF dataset")
    add_arguments(parser)
    return execute(run, parser.parse_args(argv))


if __name__ == "__main__":
    sys.exit(main())
