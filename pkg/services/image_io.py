# image_io.py - Grayscale image and mask files (PGM P5 / PNG) via OpenCV

import logging
import os

import cv2
import numpy as np

from services.errors import ConfigurationError

logger = logging.getLogger(__name__)

ALLOWED_EXTENSIONS = {"pgm", "png"}
MASK_THRESHOLD = 128


def _check_extension(path: str) -> None:
    ext = path.rsplit(".", 1)[-1].lower() if "." in path else ""
    if ext not in ALLOWED_EXTENSIONS:
        raise ConfigurationError(f"Unsupported image type for {path}. Allowed: {', '.join(sorted(ALLOWED_EXTENSIONS))}")


def to_uint8(image: np.ndarray) -> np.ndarray:
    """Quantize a [0, 1] float image to 8 bits"""
    return np.round(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)


def _write(path: str, pixels: np.ndarray) -> None:
    _check_extension(path)
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    # PGM is written as binary P5
    if not cv2.imwrite(path, pixels):
        raise ConfigurationError(f"Could not write image {path}")


def _read(path: str) -> np.ndarray:
    _check_extension(path)
    if not os.path.exists(path):
        raise ConfigurationError(f"Image not found: {path}")
    pixels = cv2.imread(path, cv2.IMREAD_GRAYSCALE)
    if pixels is None:
        raise ConfigurationError(f"Could not decode image {path}")
    return pixels


def save_image(path: str, image: np.ndarray) -> None:
    _write(path, to_uint8(image))


def load_image(path: str) -> np.ndarray:
    """Read an 8-bit grayscale file as floats in [0, 1]"""
    return _read(path).astype(np.float64) / 255.0


def save_mask(path: str, mask: np.ndarray) -> None:
    _write(path, np.where(np.asarray(mask) > 0, 255, 0).astype(np.uint8))


def load_mask(path: str) -> np.ndarray:
    return _read(path) >= MASK_THRESHOLD


def save_normalized(path: str, values: np.ndarray) -> None:
    """Min-max normalize a real-valued map into an 8-bit grayscale file"""
    values = np.asarray(values, dtype=np.float64)
    low, high = float(values.min()), float(values.max())
    if high > low:
        scaled = (values - low) / (high - low)
    else:
        scaled = np.zeros_like(values)
    save_image(path, scaled)
