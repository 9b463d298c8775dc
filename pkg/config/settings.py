# settings.py - Process-level settings loaded from the environment / .env

import os
import logging
from dotenv import load_dotenv

from services.errors import ConfigurationError

# Load environment variables
load_dotenv()

logger = logging.getLogger(__name__)

LOG_LEVEL = os.getenv("TCIF_LOG_LEVEL", "INFO")
DATA_DIR = os.getenv("TCIF_DATA_DIR", "./data")
OUTPUT_DIR = os.getenv("TCIF_OUTPUT_DIR", "./runs")
DEFAULT_SEED = os.getenv("TCIF_SEED", "0")
NUM_THREADS = os.getenv("TCIF_NUM_THREADS", "1")

THREAD_ENV_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")
VALID_LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


def _parse_int(name: str, raw: str) -> int:
    try:
        return int(raw)
    except (TypeError, ValueError):
        raise ConfigurationError(f"{name} must be an integer, got {raw!r}")


def validate_settings() -> dict:
    """Validate environment settings and return them resolved"""
    level = LOG_LEVEL.upper()
    if level not in VALID_LOG_LEVELS:
        raise ConfigurationError(
            f"TCIF_LOG_LEVEL must be one of {', '.join(VALID_LOG_LEVELS)}, got {LOG_LEVEL!r}"
        )

    seed = _parse_int("TCIF_SEED", DEFAULT_SEED)
    threads = _parse_int("TCIF_NUM_THREADS", NUM_THREADS)
    if threads < 1:
        raise ConfigurationError(f"TCIF_NUM_THREADS must be >= 1, got {threads}")
    if threads != 1:
        logger.warning(f"⚠️ TCIF_NUM_THREADS={threads}: runs are only bit-reproducible with 1 thread")

    return {
        "log_level": level,
        "data_dir": DATA_DIR,
        "output_dir": OUTPUT_DIR,
        "seed": seed,
        "num_threads": threads,
    }


def pin_thread_count(threads: int = None) -> None:
    """Export BLAS/OpenMP thread counts; must run before numpy is imported"""
    if threads is None:
        threads = _parse_int("TCIF_NUM_THREADS", NUM_THREADS)
    for var in THREAD_ENV_VARS:
        os.environ.setdefault(var, str(threads))


def configure_logging(level: str = None) -> None:
    """Set up root logging the same way for every entry point"""
    level = (level or LOG_LEVEL).upper()
    if level not in VALID_LOG_LEVELS:
        raise ConfigurationError(f"Unknown log level: {level}")
    logging.basicConfig(
        level=getattr(logging, level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
