# app.py - Command-line entry point for dataset synthesis, training, evaluation and verification

import argparse
import logging
import sys

from config.settings import configure_logging, pin_thread_count

# BLAS thread counts must be fixed before numpy loads
pin_thread_count()

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_VERIFICATION = 3


class CliParser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with code 1"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> CliParser:
    from commands import COMMANDS

    parser = CliParser(prog="conduction-net", description="Infrared small-target detection toolkit")
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
    subparsers.required = True
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def main(argv=None) -> int:
    from services.errors import (CheckpointError, ConfigurationError, DimensionError, ConductionNetError,
                                 VerificationError)

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    try:
        configure_logging(getattr(args, "log_level", None))
        return args.handler(args)
    except VerificationError as e:
        logger.error(f"❌ Verification failed: {e}")
        return EXIT_VERIFICATION
    except (ConfigurationError, DimensionError, CheckpointError) as e:
        logger.error(f"❌ {type(e).__name__}: {e}")
        return EXIT_CONFIG
    except (FileNotFoundError, NotADirectoryError) as e:
        logger.error(f"❌ Missing file: {e}")
        return EXIT_CONFIG
    except ConductionNetError as e:
        logger.error(f"❌ {e}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
