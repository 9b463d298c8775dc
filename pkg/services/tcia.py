# tcia.py - Thermal conduction-inspired attention: shift stencil + axis-squeezed attentions

import logging
import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from services import autodiff as ad
from services.autodiff import Tensor
from services.errors import ConfigurationError, DimensionError

logger = logging.getLogger(__name__)

# channel quarters in order: +x (row i+1), -x (row i-1), +y (col j+1), -y (col j-1)
SHIFT_GROUPS = ((-2, +1), (-2, -1), (-1, +1), (-1, -1))
HORIZONTAL = "horizontal"
VERTICAL = "vertical"


@dataclass
class TciaParams:
    """Projections, learnable gamma and head layout of one attention block"""
    w_q: Tensor
    b_q: Tensor
    w_k: Tensor
    b_k: Tensor
    w_v: Tensor
    b_v: Tensor
    w_out: Tensor
    b_out: Tensor
    gamma: Tensor
    heads: int

    @property
    def channels(self) -> int:
        return self.w_q.shape[1]

    @property
    def qk_dim(self) -> int:
        return self.w_q.shape[0]

    @property
    def v_dim(self) -> int:
        return self.w_v.shape[0]

    def validate(self) -> None:
        if self.channels % 4:
            raise ConfigurationError(f"TCIA needs channels divisible by 4, got {self.channels}")
        if self.qk_dim % self.heads or self.v_dim % self.heads:
            raise ConfigurationError(
                f"C_qk={self.qk_dim} and C_v={self.v_dim} must be divisible by {self.heads} heads"
            )
        if self.w_out.shape[:2] != (self.channels, self.v_dim):
            raise ConfigurationError(f"output projection {self.w_out.shape} does not map C_v→C")

    def named_parameters(self, prefix: str = "") -> List[Tuple[str, Tensor]]:
        names = ("w_q", "b_q", "w_k", "b_k", "w_v", "b_v", "w_out", "b_out", "gamma")
        return [(f"{prefix}{n}", getattr(self, n)) for n in names]


def init_tcia(channels: int, qk_dim: int, v_dim: int, heads: int, rng: np.random.Generator,
              gamma_init: float = 0.2) -> TciaParams:
    """1×1 projections with uniform(±1/sqrt(fan_in)) weights, zero biases"""
    params = TciaParams(
        w_q=ad.init_uniform((qk_dim, channels, 1, 1), channels, rng),
        b_q=ad.init_zeros((qk_dim,)),
        w_k=ad.init_uniform((qk_dim, channels, 1, 1), channels, rng),
        b_k=ad.init_zeros((qk_dim,)),
        w_v=ad.init_uniform((v_dim, channels, 1, 1), channels, rng),
        b_v=ad.init_zeros((v_dim,)),
        w_out=ad.init_uniform((channels, v_dim, 1, 1), v_dim, rng),
        b_out=ad.init_zeros((channels,)),
        gamma=ad.init_constant((1,), gamma_init),
        heads=heads,
    )
    params.validate()
    return params


def grouped_shift(x: Tensor) -> Tensor:
    """
    Shift four channel quarters by one pixel: out = x[i+1,j], x[i-1,j], x[i,j+1], x[i,j-1].

    Reads past the border repeat the edge pixel.
    """
    if x.ndim != 4:
        raise DimensionError(f"grouped_shift expects B×C×H×W, got {x.shape}")
    channels = x.shape[1]
    if channels % 4:
        raise ConfigurationError(f"grouped_shift needs channels divisible by 4, got {channels}")
    quarter = channels // 4
    parts = []
    for g, (axis, offset) in enumerate(SHIFT_GROUPS):
        group = ad.take(x, np.arange(g * quarter, (g + 1) * quarter), axis=1)
        extent = x.shape[axis]
        parts.append(ad.take(group, np.clip(np.arange(extent) + offset, 0, extent - 1), axis=axis))
    return ad.concat(parts, axis=1)


def stencil_term(x: Tensor) -> Tensor:
    """Directional neighbour minus centre per channel group"""
    return ad.sub(grouped_shift(x), x)


def axis_squeeze(x: Tensor, axis: str) -> Tensor:
    """B×C×H×W → B×L×C tokens: horizontal averages over W (L=H), vertical over H (L=W)"""
    if x.ndim != 4:
        raise DimensionError(f"axis_squeeze expects B×C×H×W, got {x.shape}")
    if axis == HORIZONTAL:
        pooled = ad.mean_reduce(x, axis=3)
    elif axis == VERTICAL:
        pooled = ad.mean_reduce(x, axis=2)
    else:
        raise ConfigurationError(f"axis must be {HORIZONTAL!r} or {VERTICAL!r}, got {axis!r}")
    return ad.transpose(pooled, (0, 2, 1))


def _split_heads(tokens: Tensor, heads: int) -> Tensor:
    batch, length, dim = tokens.shape
    return ad.transpose(ad.reshape(tokens, (batch, length, heads, dim // heads)), (0, 2, 1, 3))


def multi_head_attention(q: Tensor, k: Tensor, v: Tensor, heads: int) -> Tuple[Tensor, Tensor]:
    """
    Scaled dot-product attention over B×L×C token sets.

    Returns the B×L×C_v output and the B×heads×L×L attention weights.
    """
    if q.shape != k.shape or q.shape[:2] != v.shape[:2]:
        raise DimensionError(f"attention: q {q.shape}, k {k.shape}, v {v.shape} disagree")
    batch, length, _ = v.shape
    qh, kh, vh = _split_heads(q, heads), _split_heads(k, heads), _split_heads(v, heads)
    scale = 1.0 / math.sqrt(q.shape[2] // heads)
    scores = ad.scalar_mul(ad.matmul(qh, ad.transpose(kh, (0, 1, 3, 2))), scale)
    weights = ad.softmax(scores, axis=-1)
    out = ad.transpose(ad.matmul(weights, vh), (0, 2, 1, 3))
    return ad.reshape(out, (batch, length, v.shape[2])), weights


def _tokens_to_map(tokens: Tensor, axis: str) -> Tensor:
    """B×L×C tokens back to a broadcastable B×C×H×1 (horizontal) or B×C×1×W (vertical) map"""
    channels_first = ad.transpose(tokens, (0, 2, 1))
    batch, channels, length = channels_first.shape
    shape = (batch, channels, length, 1) if axis == HORIZONTAL else (batch, channels, 1, length)
    return ad.reshape(channels_first, shape)


def tcia_forward(x: Tensor, p: TciaParams, return_attention: bool = False):
    """
    gamma * (stencil-driven horizontal + vertical conduction attention).

    The caller's residual adds x to complete P^{t+1} = P^t + gamma * (...).
    With return_attention, also returns {axis: weights}.
    """
    if x.ndim != 4 or x.shape[1] != p.channels:
        raise ConfigurationError(f"TCIA with {p.channels} channels cannot take input {x.shape}")
    s = stencil_term(x)
    q = ad.conv2d(s, p.w_q, p.b_q)
    k = ad.conv2d(s, p.w_k, p.b_k)
    v = ad.conv2d(s, p.w_v, p.b_v)

    fused = None
    attention = {}
    for axis in (HORIZONTAL, VERTICAL):
        out, weights = multi_head_attention(axis_squeeze(q, axis), axis_squeeze(k, axis),
                                            axis_squeeze(v, axis), p.heads)
        attention[axis] = weights
        branch = _tokens_to_map(out, axis)
        fused = branch if fused is None else ad.add(fused, branch)

    projected = ad.conv2d(fused, p.w_out, p.b_out)
    result = ad.mul(projected, ad.reshape(p.gamma, (1, 1, 1, 1)))
    if return_attention:
        return result, attention
    return result


def param_count(p: TciaParams) -> int:
    return sum(t.size for _, t in p.named_parameters())
