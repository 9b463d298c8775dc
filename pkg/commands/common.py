# common.py - Flags shared by the subcommands and resolution of the per-run config

import argparse
import logging
import os
from typing import Optional

from config import settings
from config.run_config import RunConfig, load_run_config, save_run_config

logger = logging.getLogger(__name__)


def add_common_flags(parser: argparse.ArgumentParser, out_help: str = "output directory",
                     out_required: bool = False, with_out: bool = True) -> None:
    parser.add_argument("--config", help="run config file ([run] [model] [synth] [optim] [eval] sections)")
    parser.add_argument("--seed", type=int, help=f"master seed (default TCIF_SEED={settings.DEFAULT_SEED})")
    if with_out:
        parser.add_argument("--out", required=out_required, help=out_help)
    parser.add_argument("--log-level", choices=settings.VALID_LOG_LEVELS, type=str.upper,
                        help=f"logging level (default {settings.LOG_LEVEL})")


def add_model_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--no-tcia", action="store_true", help="disable the attention branch")
    parser.add_argument("--no-tcbm", action="store_true", help="disable the boundary branch")


def add_optim_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--epochs", type=int, help="training epochs (default 100)")
    parser.add_argument("--batch-size", type=int, help="batch size (default 4)")
    parser.add_argument("--lr", type=float, help="AdaGrad learning rate (default 0.05)")
    parser.add_argument("--weight-decay", type=float, help="decoupled weight decay (default 0.0004)")


def resolve_config(args: argparse.Namespace, command: str) -> RunConfig:
    """Config file (or defaults) overridden by any flags given on the command line"""
    config = load_run_config(args.config) if args.config else RunConfig()
    config.run.command = command

    if args.seed is not None:
        config.run.seed = args.seed
    elif not args.config:
        config.run.seed = settings.validate_settings()["seed"]

    if getattr(args, "no_tcia", False):
        config.model.use_tcia = False
    if getattr(args, "no_tcbm", False):
        config.model.use_tcbm = False

    for flag, key in (("epochs", "epochs"), ("batch_size", "batch_size"), ("lr", "lr"),
                      ("weight_decay", "weight_decay")):
        value = getattr(args, flag, None)
        if value is not None:
            setattr(config.optim, key, value)

    config.validate()
    return config


def apply_checkpoint_overrides(args: argparse.Namespace, config: RunConfig, command: str) -> RunConfig:
    """
    Overlay a checkpoint's stored config for commands that reuse a trained model.

    A --config file contributes only its [eval] section; the model and
    training sections always come from the checkpoint.
    """
    config.run.command = command
    if args.config:
        config.eval = load_run_config(args.config).eval
    if args.seed is not None:
        config.run.seed = args.seed
    if getattr(args, "threshold", None) is not None:
        config.eval.threshold = args.threshold
    if getattr(args, "match_dist", None) is not None:
        config.eval.match_dist = args.match_dist
    config.validate()
    return config


def output_dir(args: argparse.Namespace, command: str, default: Optional[str] = None) -> str:
    path = args.out or default or os.path.join(settings.OUTPUT_DIR, command)
    os.makedirs(path, exist_ok=True)
    return path


def record_config(config: RunConfig, out_dir: str) -> str:
    """Every run leaves its fully resolved config beside its outputs"""
    return save_run_config(config, out_dir)
