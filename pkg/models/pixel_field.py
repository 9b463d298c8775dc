# pixel_field.py - 2-D scalar field state for the pixel-movement simulator

from dataclasses import dataclass, field as dataclass_field

import numpy as np

from services.errors import ConfigurationError, StabilityError

BOUNDARIES = ("replicate", "periodic", "zero")
MAX_STABLE_GAMMA = 0.25


def gamma_is_stable(gamma: float) -> bool:
    return 0.0 < gamma <= MAX_STABLE_GAMMA


@dataclass
class PixelField:
    """
    Field P^t on an H×W grid.

    gamma is the dimensionless diffusion coefficient alpha/(dx*dy);
    sources and self-change are fixed at zero.
    """
    values: np.ndarray
    boundary: str = "replicate"
    gamma: float = 0.2
    time: int = dataclass_field(default=0)

    def __post_init__(self):
        self.values = np.array(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ConfigurationError(f"PixelField needs a 2-D array, got shape {self.values.shape}")
        if self.boundary not in BOUNDARIES:
            raise ConfigurationError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")
        if not np.all(np.isfinite(self.values)):
            raise ConfigurationError("PixelField values must be finite")
        if not gamma_is_stable(self.gamma):
            raise StabilityError(
                f"gamma={self.gamma} violates the explicit-scheme bound 0 < gamma <= {MAX_STABLE_GAMMA}"
            )

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def with_values(self, values: np.ndarray) -> "PixelField":
        return PixelField(values, boundary=self.boundary, gamma=self.gamma, time=self.time + 1)
