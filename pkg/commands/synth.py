# synth.py - `synth`: generate a synthetic scene dataset folder

import argparse
import logging

from commands.common import add_common_flags, output_dir, record_config, resolve_config
from config import settings
from services.data_synth import generate_dataset, write_dataset

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("synth", help="generate synthetic infrared scenes")
    add_common_flags(parser, out_help=f"dataset folder (default {settings.DATA_DIR})")
    parser.add_argument("--n", type=int, help="number of scenes (default [run] n_samples)")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = resolve_config(args, "synth")
    if args.n is not None:
        config.run.n_samples = args.n
    out = output_dir(args, "synth", default=settings.DATA_DIR)

    dataset = generate_dataset(config.synth, config.run.n_samples, config.run.seed, config.run.split_ratio)
    write_dataset(dataset, config.synth, out)
    record_config(config, out)
    n_train = len(dataset.subset("train"))
    print(f"Wrote {len(dataset)} scenes ({n_train} train / {len(dataset) - n_train} test) to {out}")
    return 0
