#!/usr/bin/env python3
"""
Command-line entry point: ``python -m src.scripts.main <command> [options]``.

Commands: gen-data, train, eval, ablate, grad-check. Exit codes are 0 on
success, 1 for usage errors, 2 for data errors and 3 for numerical failures.
"""
import sys

from . import ablate, eval as evaluate, gen_data, grad_check, train
from .common import ArgumentParser, execute

COMMANDS = {
    'gen-data': (gen_data, "Generate a synthetic MPNF dataset"),
    'train': (train, "Train the multimodal parallel network"),
    'eval': (evaluate, "Evaluate a trained model on one split"),
    'ablate': (ablate, "Compare architecture variants"),
    'grad-check': (grad_check, "Finite-difference gradient checks"),
}


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="mpn", description="Audio-visual event localization with a parallel network")
    commands = parser.add_subparsers(dest="command", metavar="command", parser_class=ArgumentParser)
    commands.required = True
    for name, (module, help_text) in COMMANDS.items():
        sub = commands.add_parser(name, help=help_text, description=help_text)
        module.add_arguments(sub)
        sub.set_defaults(run=module.run)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return execute(args.run, args)


if __name__ == "__main__":
    sys.exit(main())
