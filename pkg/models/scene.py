# scene.py - Synthetic infrared scene records

from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from services.errors import ConfigurationError


@dataclass
class SynthConfig:
    """Generation parameters for synthetic small-target scenes"""
    image_size: Tuple[int, int] = (64, 64)
    target_count: Tuple[int, int] = (1, 3)
    target_area: Tuple[int, int] = (4, 60)
    contrast: Tuple[float, float] = (0.25, 0.5)
    background_level: float = 0.3
    background_amplitude: float = 0.15
    background_grid: int = 4
    noise_sigma: float = 0.03
    clutter_count: Tuple[int, int] = (0, 2)
    clutter_sigma: Tuple[float, float] = (5.0, 9.0)
    clutter_amplitude: Tuple[float, float] = (0.05, 0.15)
    margin: int = 4
    split_seed: int = 0

    def validate(self) -> None:
        height, width = self.image_size
        if height < 1 or width < 1:
            raise ConfigurationError(f"image_size must be positive, got {self.image_size}")
        for name in ("target_count", "target_area", "contrast", "clutter_count",
                     "clutter_sigma", "clutter_amplitude"):
            low, high = getattr(self, name)
            if low > high:
                raise ConfigurationError(f"{name} range is empty: {low} > {high}")
            if low < 0:
                raise ConfigurationError(f"{name} must be non-negative, got {low}")
        if self.target_area[0] < 1:
            raise ConfigurationError("target_area minimum must be at least one pixel")
        if self.noise_sigma < 0:
            raise ConfigurationError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.contrast[0] <= self.noise_sigma:
            raise ConfigurationError(
                f"contrast {self.contrast[0]} must exceed noise sigma {self.noise_sigma} for targets to be findable"
            )
        if self.background_grid < 1:
            raise ConfigurationError(f"background_grid must be >= 1, got {self.background_grid}")
        if self.target_count[1] > 0:
            if height - 2 * self.margin < 1 or width - 2 * self.margin < 1:
                raise ConfigurationError(f"margin {self.margin} leaves no room for targets in {self.image_size}")
            if self.target_area[0] > (height - 2 * self.margin) * (width - 2 * self.margin):
                raise ConfigurationError(f"target_area {self.target_area} cannot fit in {self.image_size}")


@dataclass
class SceneMeta:
    seed: int
    n_targets: int
    centers: List[Tuple[float, float]] = field(default_factory=list)
    radii: List[Tuple[float, float]] = field(default_factory=list)
    areas: List[int] = field(default_factory=list)
    background: Dict[str, float] = field(default_factory=dict)


@dataclass
class SceneSample:
    """Image in [0, 1] with its target mask, boundary mask and generation record"""
    image: np.ndarray
    mask: np.ndarray
    boundary_mask: np.ndarray
    meta: SceneMeta


@dataclass
class SceneDataset:
    samples: List[SceneSample]
    ids: List[str]
    splits: List[str]

    def __len__(self) -> int:
        return len(self.samples)

    def subset(self, split: str) -> "SceneDataset":
        keep = [i for i, s in enumerate(self.splits) if s == split]
        return SceneDataset([self.samples[i] for i in keep], [self.ids[i] for i in keep], [split] * len(keep))

    def arrays(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Stack into N×1×H×W float arrays (image, mask, boundary)"""
        images = np.stack([s.image for s in self.samples])[:, None].astype(np.float64)
        masks = np.stack([s.mask for s in self.samples])[:, None].astype(np.float64)
        bounds = np.stack([s.boundary_mask for s in self.samples])[:, None].astype(np.float64)
        return images, masks, bounds
