# tcbm.py - Thermal conduction boundary module: fixed Laplace front end in a residual block

import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from services import autodiff as ad
from services.autodiff import Tensor
from services.errors import DimensionError

logger = logging.getLogger(__name__)

LAPLACE_KERNEL = np.array([[0.0, 1.0, 0.0],
                           [1.0, -4.0, 1.0],
                           [0.0, 1.0, 0.0]])


@dataclass
class TcbmParams:
    """Two learnable 3×3 convs, the step size h and the frozen per-channel Laplace kernel"""
    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor
    h_step: Tensor
    laplace: Tensor

    @property
    def channels(self) -> int:
        return self.w1.shape[0]

    def named_parameters(self, prefix: str = "") -> List[Tuple[str, Tensor]]:
        return [(f"{prefix}{n}", getattr(self, n)) for n in ("w1", "b1", "w2", "b2", "h_step")]


def laplace_kernel(channels: int) -> Tensor:
    """Depthwise C×1×3×3 Laplace kernel; never registered as a parameter"""
    kernel = np.broadcast_to(LAPLACE_KERNEL, (channels, 1, 3, 3)).copy()
    return Tensor(kernel, requires_grad=False, name="laplace")


def init_tcbm(channels: int, rng: np.random.Generator, h_step_init: float = 1.0) -> TcbmParams:
    fan_in = channels * 9
    return TcbmParams(
        w1=ad.init_uniform((channels, channels, 3, 3), fan_in, rng),
        b1=ad.init_zeros((channels,)),
        w2=ad.init_uniform((channels, channels, 3, 3), fan_in, rng),
        b2=ad.init_zeros((channels,)),
        h_step=ad.init_constant((1,), h_step_init),
        laplace=laplace_kernel(channels),
    )


def laplace_conv(x: Tensor, kernel: Tensor = None) -> Tensor:
    """Per-channel 5-point Laplacian with replicate padding"""
    if x.ndim != 4:
        raise DimensionError(f"laplace_conv expects B×C×H×W, got {x.shape}")
    if kernel is None:
        kernel = laplace_kernel(x.shape[1])
    return ad.conv2d(x, kernel, stride=1, padding=1, pad_mode="replicate", groups=x.shape[1])


def tcbm_branch(x: Tensor, p: TcbmParams) -> Tensor:
    """conv2(σ(conv1(laplace(x))))"""
    if x.ndim != 4 or x.shape[1] != p.channels:
        raise DimensionError(f"TCBM with {p.channels} channels cannot take input {x.shape}")
    lap = laplace_conv(x, p.laplace)
    hidden = ad.gelu_like(ad.conv2d(lap, p.w1, p.b1, padding=1, pad_mode="replicate"))
    return ad.conv2d(hidden, p.w2, p.b2, padding=1, pad_mode="replicate")


def tcbm_delta(x: Tensor, p: TcbmParams) -> Tensor:
    """h * branch(x): the change P^{t+1} - P^t"""
    return ad.mul(tcbm_branch(x, p), ad.reshape(p.h_step, (1, 1, 1, 1)))


def tcbm_forward(x: Tensor, p: TcbmParams) -> Tensor:
    """P^{t+1} = P^t + h * (second-derivative features of P^t)"""
    return ad.add(x, tcbm_delta(x, p))
