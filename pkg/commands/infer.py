# infer.py - `infer`: prediction maps and per-stage feature dumps for one image

import argparse
import logging
import os

import numpy as np

from commands.common import add_common_flags, apply_checkpoint_overrides, record_config
from services import autodiff as ad
from services.checkpoint import load_checkpoint
from services.image_io import load_image, save_image, save_mask, save_normalized
from services.network import forward

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("infer", help="run a checkpoint on one image")
    parser.add_argument("--checkpoint", required=True, help="model.tcif file or the train output folder")
    parser.add_argument("--image", required=True, help="grayscale .pgm or .png input")
    parser.add_argument("--threshold", type=float, help="probability threshold for the mask")
    add_common_flags(parser, out_help="output prefix, e.g. runs/infer/scene7", out_required=True)
    parser.set_defaults(handler=run)


def write_predictions(model, image: np.ndarray, prefix: str, threshold: float) -> list:
    """Main/body/boundary probability images, the binary mask and one map per encoder and decoder stage"""
    with ad.no_grad():
        out = forward(image[None, None], model, keep_features=True)
        maps = {
            "main": ad.sigmoid(out.main_logits).data[0, 0],
            "body": ad.sigmoid(out.aux_body_logits).data[0, 0],
            "boundary": ad.sigmoid(out.aux_boundary_logits).data[0, 0],
        }
    written = []
    for name, probs in maps.items():
        path = f"{prefix}_{name}.png"
        save_image(path, probs)
        written.append(path)
    mask_path = f"{prefix}_mask.png"
    save_mask(mask_path, maps["main"] > threshold)
    written.append(mask_path)

    for stage, feature in enumerate(out.stage_maps, start=1):
        path = f"{prefix}_stage{stage}.png"
        # channel-mean energy of the stage output
        save_normalized(path, np.abs(feature.data[0]).mean(axis=0))
        written.append(path)

    for stage, feature in zip((3, 2, 1), out.decoder_maps):
        path = f"{prefix}_dec{stage}.png"
        save_normalized(path, np.abs(feature.data[0]).mean(axis=0))
        written.append(path)
    return written


def run(args: argparse.Namespace) -> int:
    model, config = load_checkpoint(args.checkpoint)
    apply_checkpoint_overrides(args, config, "infer")

    image = load_image(args.image)
    written = write_predictions(model, image, args.out, config.eval.threshold)
    record_config(config, os.path.dirname(os.path.abspath(args.out)))
    for path in written:
        print(path)
    return 0
