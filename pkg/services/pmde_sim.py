# pmde_sim.py - Explicit finite-difference simulator for the pixel movement equation

import logging
import os
from dataclasses import dataclass, field as dataclass_field
from typing import List, Optional, Tuple

import numpy as np

from models.pixel_field import PixelField, gamma_is_stable, MAX_STABLE_GAMMA
from services.errors import ConfigurationError, StabilityError
from services.image_io import save_normalized

logger = logging.getLogger(__name__)

_PAD_MODES = {"replicate": "edge", "periodic": "wrap", "zero": "constant"}


@dataclass
class SimulationResult:
    final: PixelField
    frames: List[Tuple[int, np.ndarray]] = dataclass_field(default_factory=list)
    frame_paths: List[str] = dataclass_field(default_factory=list)


def stability_bound(gamma: float) -> bool:
    """True iff the explicit 2-D scheme is stable: 0 < gamma <= 1/4"""
    return gamma_is_stable(gamma)


def laplacian_5pt(field: PixelField) -> np.ndarray:
    """
    P[i-1,j] + P[i,j-1] - 4 P[i,j] + P[i,j+1] + P[i+1,j] under the field's boundary rule.

    Terms are summed in row-major kernel-tap order, so a depthwise
    convolution with the Laplace kernel reproduces this bit for bit.
    """
    padded = np.pad(field.values, 1, mode=_PAD_MODES[field.boundary])
    up = padded[:-2, 1:-1]
    left = padded[1:-1, :-2]
    center = padded[1:-1, 1:-1]
    right = padded[1:-1, 2:]
    down = padded[2:, 1:-1]
    return up + left - 4.0 * center + right + down


def step(field: PixelField) -> PixelField:
    """P^{t+1} = P^t + gamma * laplacian(P^t)"""
    if not stability_bound(field.gamma):
        raise StabilityError(
            f"gamma={field.gamma} violates the explicit-scheme bound 0 < gamma <= {MAX_STABLE_GAMMA}"
        )
    return field.with_values(field.values + field.gamma * laplacian_5pt(field))


def simulate(field: PixelField, steps: int, dump_every: Optional[int] = None,
             out_dir: Optional[str] = None) -> SimulationResult:
    """Run `steps` explicit steps, optionally keeping (and writing) every dump_every-th frame"""
    if steps < 0:
        raise ConfigurationError(f"steps must be >= 0, got {steps}")
    if dump_every is not None and dump_every < 1:
        raise ConfigurationError(f"dump_every must be >= 1, got {dump_every}")
    if not stability_bound(field.gamma):
        raise StabilityError(
            f"gamma={field.gamma} violates the explicit-scheme bound 0 < gamma <= {MAX_STABLE_GAMMA}"
        )

    result = SimulationResult(final=field)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)

    def keep(t: int, current: PixelField) -> None:
        result.frames.append((t, current.values.copy()))
        if out_dir:
            path = os.path.join(out_dir, f"frame_{t:06d}.pgm")
            save_normalized(path, current.values)
            result.frame_paths.append(path)

    current = field
    if dump_every:
        keep(0, current)
    for t in range(1, steps + 1):
        current = step(current)
        if dump_every and t % dump_every == 0:
            keep(t, current)

    result.final = current
    logger.info(f"✅ Simulated {steps} steps (gamma={field.gamma}, boundary={field.boundary}), "
                f"{len(result.frames)} frames kept")
    return result


def total_heat(field: PixelField) -> float:
    return float(field.values.sum())


def extrema(field: PixelField) -> Tuple[float, float]:
    return float(field.values.min()), float(field.values.max())


# ---------------------------------------------------------------- initial fields

def impulse_field(height: int, width: int, position: Optional[Tuple[int, int]] = None,
                  amplitude: float = 1.0, boundary: str = "replicate",
                  gamma: float = 0.25) -> PixelField:
    values = np.zeros((height, width))
    row, col = position if position is not None else (height // 2, width // 2)
    values[row, col] = amplitude
    return PixelField(values, boundary=boundary, gamma=gamma)


def random_field(height: int, width: int, seed: int = 0, boundary: str = "replicate",
                 gamma: float = 0.25) -> PixelField:
    rng = np.random.default_rng(seed)
    return PixelField(rng.random((height, width)), boundary=boundary, gamma=gamma)


def disk_field(height: int, width: int, radius: float, amplitude: float = 1.0,
               boundary: str = "replicate", gamma: float = 0.25) -> PixelField:
    rows, cols = np.mgrid[0:height, 0:width]
    inside = (rows - (height - 1) / 2.0) ** 2 + (cols - (width - 1) / 2.0) ** 2 <= radius ** 2
    return PixelField(amplitude * inside.astype(np.float64), boundary=boundary, gamma=gamma)


def scene_field(height: int, width: int, seed: int = 0, boundary: str = "replicate",
                gamma: float = 0.25) -> PixelField:
    """Synthetic small-target scene as the initial field"""
    from models.scene import SynthConfig
    from services.data_synth import generate

    sample = generate(SynthConfig(image_size=(height, width)), seed)
    return PixelField(sample.image, boundary=boundary, gamma=gamma)


INITIAL_FIELDS = ("impulse", "random", "disk", "scene")


def build_initial_field(kind: str, size: int, gamma: float, boundary: str, seed: int = 0) -> PixelField:
    if kind == "impulse":
        return impulse_field(size, size, boundary=boundary, gamma=gamma)
    if kind == "random":
        return random_field(size, size, seed=seed, boundary=boundary, gamma=gamma)
    if kind == "disk":
        return disk_field(size, size, radius=size / 6.0, boundary=boundary, gamma=gamma)
    if kind == "scene":
        return scene_field(size, size, seed=seed, boundary=boundary, gamma=gamma)
    raise ConfigurationError(f"initial field must be one of {INITIAL_FIELDS}, got {kind!r}")
