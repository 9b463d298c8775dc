# checkpoint.py - Binary model checkpoints: magic, version, run config text, parameter blobs

import logging
import os
import struct
from typing import BinaryIO, Tuple

import numpy as np

from config.run_config import RunConfig
from services.errors import CheckpointError, ConfigurationError
from services.network import ConductionNet

logger = logging.getLogger(__name__)

MAGIC = b"TCIF"
FORMAT_VERSION = 1
CHECKPOINT_NAME = "model.tcif"


def _write_u32(f: BinaryIO, value: int) -> None:
    f.write(struct.pack("<I", value))


def _read_exact(f: BinaryIO, n: int, what: str) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise CheckpointError(f"Truncated checkpoint while reading {what}")
    return data


def _read_u32(f: BinaryIO, what: str) -> int:
    return struct.unpack("<I", _read_exact(f, 4, what))[0]


def save_checkpoint(model: ConductionNet, config: RunConfig, path: str) -> str:
    """
    Layout: b"TCIF", u32 version, u32 config length + UTF-8 config text,
    then for each parameter in declaration order: u32 name length, name,
    u32 extent count, u32 extents, float64 little-endian values.
    """
    if os.path.isdir(path):
        path = os.path.join(path, CHECKPOINT_NAME)
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)

    config_text = config.to_text().encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        _write_u32(f, FORMAT_VERSION)
        _write_u32(f, len(config_text))
        f.write(config_text)
        for name, tensor in model.named_parameters():
            encoded = name.encode("utf-8")
            _write_u32(f, len(encoded))
            f.write(encoded)
            _write_u32(f, tensor.ndim)
            for extent in tensor.shape:
                _write_u32(f, extent)
            f.write(tensor.data.astype("<f8").tobytes())
    logger.info(f"💾 Checkpoint saved to {path} ({len(model.named_parameters())} tensors)")
    return path


def load_checkpoint(path: str) -> Tuple[ConductionNet, RunConfig]:
    """Rebuild the model from the stored config and restore every parameter"""
    if os.path.isdir(path):
        path = os.path.join(path, CHECKPOINT_NAME)
    if not os.path.exists(path):
        raise CheckpointError(f"Checkpoint not found: {path}")

    with open(path, "rb") as f:
        if _read_exact(f, 4, "magic") != MAGIC:
            raise CheckpointError(f"{path} is not a TCIF checkpoint")
        version = _read_u32(f, "version")
        if version != FORMAT_VERSION:
            raise CheckpointError(f"Unsupported checkpoint version {version} (expected {FORMAT_VERSION})")
        text_length = _read_u32(f, "config length")
        try:
            config = RunConfig.from_text(_read_exact(f, text_length, "config").decode("utf-8"))
            model = ConductionNet(config.model, seed=config.run.seed)
        except (UnicodeDecodeError, ConfigurationError) as e:
            raise CheckpointError(f"Checkpoint config is unreadable: {e}")

        for expected_name, tensor in model.named_parameters():
            name = _read_exact(f, _read_u32(f, "name length"), "name").decode("utf-8", errors="replace")
            if name != expected_name:
                raise CheckpointError(f"Parameter order mismatch: found {name!r}, expected {expected_name!r}")
            shape = tuple(_read_u32(f, "extent") for _ in range(_read_u32(f, "extent count")))
            if shape != tensor.shape:
                raise CheckpointError(f"{name}: stored shape {shape} does not match model shape {tensor.shape}")
            raw = _read_exact(f, 8 * tensor.size, f"values of {name}")
            tensor.data = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)
            tensor.grad = None

        if f.read(1):
            raise CheckpointError(f"Trailing bytes after the last parameter in {path}")

    logger.info(f"Checkpoint loaded from {path}")
    return model, config
