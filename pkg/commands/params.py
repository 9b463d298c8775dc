# params.py - `params`: learnable parameter count with a per-module breakdown

import argparse

from commands.common import add_common_flags, add_model_flags, resolve_config
from services.network import ConductionNet, count_params, param_breakdown


def register(subparsers) -> None:
    parser = subparsers.add_parser("params", help="count learnable parameters of a configuration")
    add_common_flags(parser)
    add_model_flags(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = resolve_config(args, "params")
    model = ConductionNet(config.model, seed=config.run.seed)
    for group, count in param_breakdown(model).items():
        print(f"{group:<8} {count:>9}")
    print(f"{'total':<8} {count_params(model):>9}")
    return 0
