# train.py - `train`: fit the network on a dataset folder

import argparse
import logging

from commands.common import (add_common_flags, add_model_flags, add_optim_flags, output_dir,
                             resolve_config)
from config import settings
from services.data_synth import load_dataset
from services.network import count_params
from services.trainer import fit

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("train", help="train the detection network")
    add_common_flags(parser)
    add_model_flags(parser)
    add_optim_flags(parser)
    parser.add_argument("--data", help=f"dataset folder written by synth (default {settings.DATA_DIR})")
    parser.add_argument("--no-progress", action="store_true", help="hide the epoch progress bar")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = resolve_config(args, "train")
    out = output_dir(args, "train")
    dataset = load_dataset(args.data or settings.DATA_DIR, use_float_images=config.run.use_float_images)

    result = fit(dataset, config, out_dir=out, show_progress=not args.no_progress)
    first = result.history[0].total if result.history else float("nan")
    last = result.history[-1].total if result.history else float("nan")
    print(f"Trained {count_params(result.model)} parameters for {config.optim.epochs} epochs: "
          f"loss {first:.4f} -> {last:.4f}")
    print(f"Checkpoint: {result.checkpoint_path}")
    print(f"Loss curve: {result.curve_path}")
    return 0
