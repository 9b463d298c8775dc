# ablation.py - `ablation`: train every branch variant over several seeds and compare test IoU

import argparse
import csv
import logging
import os
from dataclasses import replace
from statistics import median
from typing import Dict, List

from commands.common import (add_common_flags, add_optim_flags, output_dir, record_config,
                             resolve_config)
from config import settings
from models.model_config import ABLATION_VARIANTS
from services.data_synth import load_dataset
from services.errors import VerificationError
from services.metrics import evaluate
from services.network import count_params
from services.trainer import fit

logger = logging.getLogger(__name__)

ABLATION_NAME = "ablation.csv"
ABLATION_FIELDS = ("variant", "seed", "params", "iou", "niou", "pd", "fa", "final_loss")
# expected direction of median test IoU, best first
EXPECTED_ORDER = ("full", "tcia", "baseline")


def register(subparsers) -> None:
    parser = subparsers.add_parser("ablation", help="compare baseline / tcia / tcbm / full variants")
    add_common_flags(parser)
    add_optim_flags(parser)
    parser.add_argument("--data", help=f"dataset folder (default {settings.DATA_DIR})")
    parser.add_argument("--runs", type=int, default=3, help="seeds per variant")
    parser.add_argument("--strict", action="store_true", help="exit 3 if the IoU ordering does not hold")
    parser.set_defaults(handler=run)


def medians(rows: List[dict]) -> Dict[str, float]:
    grouped: Dict[str, List[float]] = {}
    for row in rows:
        grouped.setdefault(row["variant"], []).append(row["iou"])
    return {variant: median(values) for variant, values in grouped.items()}


def ordering_holds(median_iou: Dict[str, float]) -> bool:
    ranked = [median_iou[v] for v in EXPECTED_ORDER]
    return all(a >= b for a, b in zip(ranked, ranked[1:]))


def run(args: argparse.Namespace) -> int:
    config = resolve_config(args, "ablation")
    out = output_dir(args, "ablation")
    dataset = load_dataset(args.data or settings.DATA_DIR, use_float_images=config.run.use_float_images)
    test = dataset.subset("test")

    rows = []
    for variant in ABLATION_VARIANTS:
        for offset in range(args.runs):
            run_config = replace(config, model=config.model.variant(variant),
                                 run=replace(config.run, seed=config.run.seed + offset))
            logger.info(f"🔬 Variant {variant}, seed {run_config.run.seed}")
            result = fit(dataset, run_config, show_progress=False)
            report = evaluate(result.model, test, threshold=config.eval.threshold,
                              match_dist=config.eval.match_dist)
            rows.append({
                "variant": variant,
                "seed": run_config.run.seed,
                "params": count_params(result.model),
                "iou": report.iou,
                "niou": report.niou,
                "pd": report.pd,
                "fa": report.fa,
                "final_loss": result.history[-1].total if result.history else float("nan"),
            })

    path = os.path.join(out, ABLATION_NAME)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=ABLATION_FIELDS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    record_config(config, out)

    median_iou = medians(rows)
    for variant, value in median_iou.items():
        print(f"{variant:<9} median IoU {value:.4f}")
    if not ordering_holds(median_iou):
        message = "median IoU ordering full >= tcia >= baseline does not hold"
        if args.strict:
            raise VerificationError(message)
        logger.warning(f"⚠️ {message}")
    return 0
