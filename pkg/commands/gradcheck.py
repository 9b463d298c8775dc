# gradcheck.py - `gradcheck`: run the gradient verification suite

import argparse
import logging

from commands.common import add_common_flags
from config.run_config import load_run_config
from services.errors import VerificationError
from services.gradcheck import summarize
from services.gradcheck_suite import DEFAULT_SEEDS, run_gradcheck_suite

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("gradcheck", help="compare reverse-mode gradients with central differences")
    parser.add_argument("--seeds", type=int, nargs="+", help=f"check seeds (default {list(DEFAULT_SEEDS)})")
    parser.add_argument("--skip-network", action="store_true", help="leave out the end-to-end network checks")
    add_common_flags(parser, with_out=False)
    parser.set_defaults(handler=run)


def resolve_seeds(args: argparse.Namespace) -> list:
    """--seeds, else --seed, else the [run] seed of --config, else the default set"""
    if args.seeds:
        return list(args.seeds)
    if args.seed is not None:
        return [args.seed]
    if args.config:
        return [load_run_config(args.config).run.seed]
    return list(DEFAULT_SEEDS)


def run(args: argparse.Namespace) -> int:
    results = run_gradcheck_suite(resolve_seeds(args), include_network=not args.skip_network)
    print(summarize(results))
    failed = [r for r in results if not r.passed]
    if failed:
        names = ", ".join(sorted({f"{r.name}@{r.seed}" for r in failed}))
        raise VerificationError(f"{len(failed)} gradient checks failed: {names}")
    return 0
