# evaluate.py - `eval`: score a checkpoint on a dataset split

import argparse
import logging

from commands.common import add_common_flags, apply_checkpoint_overrides, output_dir, record_config
from config import settings
from services.checkpoint import load_checkpoint
from services.data_synth import load_dataset
from services.metrics import evaluate, format_report_table, write_report_csv

logger = logging.getLogger(__name__)

SPLITS = ("test", "train", "all")


def register(subparsers) -> None:
    parser = subparsers.add_parser("eval", help="compute IoU, nIoU, Pd and Fa for a checkpoint")
    parser.add_argument("--checkpoint", required=True, help="model.tcif file or the train output folder")
    parser.add_argument("--data", help=f"dataset folder (default {settings.DATA_DIR})")
    parser.add_argument("--split", choices=SPLITS, default="test")
    parser.add_argument("--threshold", type=float, help="probability threshold (default [eval] threshold)")
    parser.add_argument("--match-dist", type=float, help="centroid match distance in pixels (default 3.0)")
    add_common_flags(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    model, config = load_checkpoint(args.checkpoint)
    apply_checkpoint_overrides(args, config, "eval")

    dataset = load_dataset(args.data or settings.DATA_DIR, use_float_images=config.run.use_float_images)
    if args.split != "all":
        dataset = dataset.subset(args.split)
    report = evaluate(model, dataset, threshold=config.eval.threshold, match_dist=config.eval.match_dist)

    out = output_dir(args, "eval")
    write_report_csv(report, out, ids=dataset.ids)
    record_config(config, out)
    print(format_report_table(report))
    return 0
