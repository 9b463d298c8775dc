# network.py - Encoder-decoder detection network built from TCIT blocks, plus its Dice losses

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from models.model_config import ModelConfig
from services import autodiff as ad
from services.autodiff import Tensor
from services.errors import ConfigurationError, DimensionError
from services.tcbm import TcbmParams, init_tcbm, tcbm_delta
from services.tcia import TciaParams, init_tcia, tcia_forward

logger = logging.getLogger(__name__)

Params = List[Tuple[str, Tensor]]


@dataclass
class NormParams:
    gain: Tensor
    bias: Tensor

    def named_parameters(self, prefix: str = "") -> Params:
        return [(f"{prefix}gain", self.gain), (f"{prefix}bias", self.bias)]


@dataclass
class ConvParams:
    w: Tensor
    b: Optional[Tensor] = None

    def named_parameters(self, prefix: str = "") -> Params:
        named = [(f"{prefix}w", self.w)]
        if self.b is not None:
            named.append((f"{prefix}b", self.b))
        return named


@dataclass
class FfnParams:
    expand: ConvParams
    project: ConvParams

    def named_parameters(self, prefix: str = "") -> Params:
        return self.expand.named_parameters(f"{prefix}expand.") + self.project.named_parameters(f"{prefix}project.")


@dataclass
class TcitBlock:
    """Pre-norm transformer block with parallel TCIA / TCBM branches and an FFN"""
    norm1: NormParams
    norm2: NormParams
    ffn: FfnParams
    tcia: Optional[TciaParams] = None
    tcbm: Optional[TcbmParams] = None

    def named_parameters(self, prefix: str = "") -> Params:
        named = self.norm1.named_parameters(f"{prefix}norm1.")
        if self.tcia is not None:
            named += self.tcia.named_parameters(f"{prefix}tcia.")
        if self.tcbm is not None:
            named += self.tcbm.named_parameters(f"{prefix}tcbm.")
        named += self.norm2.named_parameters(f"{prefix}norm2.")
        named += self.ffn.named_parameters(f"{prefix}ffn.")
        return named


@dataclass
class StageParams:
    embed: ConvParams
    embed_stride: int
    position: ConvParams
    blocks: List[TcitBlock]
    norm: NormParams

    def named_parameters(self, prefix: str = "") -> Params:
        named = self.embed.named_parameters(f"{prefix}embed.")
        named += self.position.named_parameters(f"{prefix}pos.")
        for index, block in enumerate(self.blocks, start=1):
            named += block.named_parameters(f"{prefix}block{index}.")
        named += self.norm.named_parameters(f"{prefix}norm.")
        return named


@dataclass
class NetworkOutput:
    main_logits: Tensor
    aux_body_logits: Tensor
    aux_boundary_logits: Tensor
    stage_maps: List[Tensor] = field(default_factory=list)
    decoder_maps: List[Tensor] = field(default_factory=list)  # stage-3, stage-2, stage-1 resolution


@dataclass
class LossComponents:
    l_seg: float
    l_tb: float
    l_ib: float
    total: float


# ---------------------------------------------------------------- construction

def _conv(out_ch: int, in_ch: int, kernel: int, rng: np.random.Generator, bias: bool = True) -> ConvParams:
    w = ad.init_uniform((out_ch, in_ch, kernel, kernel), in_ch * kernel * kernel, rng)
    return ConvParams(w=w, b=ad.init_zeros((out_ch,)) if bias else None)


def _norm(channels: int) -> NormParams:
    return NormParams(gain=ad.init_constant((channels,), 1.0), bias=ad.init_zeros((channels,)))


class ConductionNet:
    """
    Four-stage encoder of TCIT blocks, three stride-2 deconvolutions with
    additive skips, and three segmentation heads (main, body, boundary).
    """

    def __init__(self, config: ModelConfig, seed: int = 0):
        config.validate()
        self.config = config
        self.seed = seed
        rng = np.random.default_rng(seed)

        self.stages: List[StageParams] = []
        in_ch = 1
        for stage in range(4):
            channels = config.stage_channels[stage]
            stride = config.stage_strides[stage]
            c_qk, c_v = config.attention_dims(stage)
            blocks = []
            for _ in range(config.blocks_per_stage[stage]):
                blocks.append(TcitBlock(
                    norm1=_norm(channels),
                    tcia=init_tcia(channels, c_qk, c_v, config.heads_per_stage[stage], rng,
                                   config.gamma_init) if config.use_tcia else None,
                    tcbm=init_tcbm(channels, rng, config.h_step_init) if config.use_tcbm else None,
                    norm2=_norm(channels),
                    ffn=FfnParams(
                        expand=_conv(channels * config.ffn_expansion, channels, 1, rng),
                        project=_conv(channels, channels * config.ffn_expansion, 1, rng),
                    ),
                ))
            self.stages.append(StageParams(
                embed=_conv(channels, in_ch, 2 * stride - 1, rng),
                embed_stride=stride,
                position=ConvParams(w=ad.init_uniform((channels, 1, 3, 3), 9, rng)),
                blocks=blocks,
                norm=_norm(channels),
            ))
            in_ch = channels

        # decoder stages 3, 2, 1
        self.up: List[ConvParams] = []
        self.align: List[ConvParams] = []
        for stage in (2, 1, 0):
            deeper = config.stage_channels[stage + 1]
            channels = config.stage_channels[stage]
            self.up.append(ConvParams(
                w=ad.init_uniform((deeper, channels, 2, 2), deeper * 4, rng),
                b=ad.init_zeros((channels,)),
            ))
            self.align.append(_conv(channels, channels, 1, rng))

        aux = config.stage_channels[config.aux_stage - 1]
        self.head_main = _conv(1, config.stage_channels[0], 1, rng)
        self.head_body = _conv(1, aux, 1, rng)
        self.head_boundary = _conv(1, aux, 1, rng)

    def named_parameters(self) -> Params:
        """All learnable tensors in declaration order"""
        named: Params = []
        for index, stage in enumerate(self.stages, start=1):
            named += stage.named_parameters(f"stage{index}.")
        for level, up, align in zip((3, 2, 1), self.up, self.align):
            named += up.named_parameters(f"decoder.up{level}.")
            named += align.named_parameters(f"decoder.align{level}.")
        named += self.head_main.named_parameters("head.main.")
        named += self.head_body.named_parameters("head.body.")
        named += self.head_boundary.named_parameters("head.boundary.")
        return named

    def parameters(self) -> List[Tensor]:
        return [t for _, t in self.named_parameters()]

    def fixed_kernels(self) -> List[Tuple[str, Tensor]]:
        kernels = []
        for s, stage in enumerate(self.stages, start=1):
            for b, block in enumerate(stage.blocks, start=1):
                if block.tcbm is not None:
                    kernels.append((f"stage{s}.block{b}.tcbm.laplace", block.tcbm.laplace))
        return kernels

    def zero_grad(self) -> None:
        for t in self.parameters():
            t.zero_grad()


# ---------------------------------------------------------------- building blocks

def channel_norm(x: Tensor, norm: NormParams) -> Tensor:
    """Layer norm over the channel axis of a B×C×H×W map"""
    tokens = ad.transpose(x, (0, 2, 3, 1))
    return ad.transpose(ad.layer_norm(tokens, norm.gain, norm.bias), (0, 3, 1, 2))


def patch_embed(x: Tensor, stage: StageParams) -> Tensor:
    """Strided (2s-1)×(2s-1) convolution to the stage width; extents shrink by s"""
    s = stage.embed_stride
    return ad.conv2d(x, stage.embed.w, stage.embed.b, stride=s, padding=s - 1)


def position_code(x: Tensor, position: ConvParams) -> Tensor:
    """x + depthwise 3×3 conv(x): conditional positional encoding"""
    return ad.add(x, ad.conv2d(x, position.w, padding=1, groups=x.shape[1]))


def feed_forward(x: Tensor, ffn: FfnParams) -> Tensor:
    hidden = ad.gelu_like(ad.conv2d(x, ffn.expand.w, ffn.expand.b))
    return ad.conv2d(hidden, ffn.project.w, ffn.project.b)


def tcit_forward(x: Tensor, block: TcitBlock, return_deltas: bool = False):
    """
    u = x + TCIA(norm(x)) + TCBM delta(norm(x)); y = u + FFN(norm(u)).

    With return_deltas, also returns the two branch deltas (None when a
    branch is switched off).
    """
    normed = channel_norm(x, block.norm1)
    body = tcia_forward(normed, block.tcia) if block.tcia is not None else None
    boundary = tcbm_delta(normed, block.tcbm) if block.tcbm is not None else None

    u = x
    if body is not None:
        u = ad.add(u, body)
    if boundary is not None:
        u = ad.add(u, boundary)
    y = ad.add(u, feed_forward(channel_norm(u, block.norm2), block.ffn))
    if return_deltas:
        return y, body, boundary
    return y


def _accumulate(total: Optional[Tensor], delta: Optional[Tensor]) -> Optional[Tensor]:
    if delta is None:
        return total
    return delta if total is None else ad.add(total, delta)


def _head(x: Tensor, head: ConvParams, size: Tuple[int, int]) -> Tensor:
    return ad.resize_bilinear(ad.conv2d(x, head.w, head.b), *size)


def forward(image: Union[Tensor, np.ndarray], model: ConductionNet, keep_features: bool = False) -> NetworkOutput:
    image = ad.as_tensor(image)
    if image.ndim != 4 or image.shape[1] != 1:
        raise DimensionError(f"network input must be B×1×H×W, got {image.shape}")
    height, width = image.shape[2:]
    stride = model.config.total_stride
    if height % stride or width % stride:
        raise ConfigurationError(f"input {height}×{width} must be divisible by {stride}")

    encoded = []
    body_sum = boundary_sum = None
    x = image
    for index, stage in enumerate(model.stages):
        x = position_code(patch_embed(x, stage), stage.position)
        feeds_aux = index == model.config.aux_stage - 1
        for block in stage.blocks:
            x, body, boundary = tcit_forward(x, block, return_deltas=True)
            if feeds_aux:
                body_sum = _accumulate(body_sum, body)
                boundary_sum = _accumulate(boundary_sum, boundary)
        x = channel_norm(x, stage.norm)
        encoded.append(x)

    d = encoded[3]
    decoded = []
    for up, align, skip in zip(model.up, model.align, (encoded[2], encoded[1], encoded[0])):
        d = ad.deconv2d(d, up.w, up.b, stride=2)
        d = ad.gelu_like(ad.add(d, ad.conv2d(skip, align.w, align.b)))
        decoded.append(d)

    first = model.config.stage_strides[0]
    upsampled = ad.resize_bilinear(d, d.shape[2] * first, d.shape[3] * first)
    main = ad.conv2d(upsampled, model.head_main.w, model.head_main.b)

    zeros = ad.Tensor(np.zeros(encoded[model.config.aux_stage - 1].shape))
    body_logits = _head(body_sum if body_sum is not None else zeros, model.head_body, (height, width))
    boundary_logits = _head(boundary_sum if boundary_sum is not None else zeros,
                            model.head_boundary, (height, width))
    return NetworkOutput(main_logits=main, aux_body_logits=body_logits,
                         aux_boundary_logits=boundary_logits,
                         stage_maps=encoded if keep_features else [],
                         decoder_maps=decoded if keep_features else [])


def stage_features(image: Union[Tensor, np.ndarray], model: ConductionNet) -> List[np.ndarray]:
    """Per-stage encoder maps (B×C×h×w arrays) for visualization"""
    with ad.no_grad():
        out = forward(image, model, keep_features=True)
    return [t.data for t in out.stage_maps]


# ---------------------------------------------------------------- losses

def dice_loss(pred_logits: Tensor, target_mask: Union[Tensor, np.ndarray], eps: float = 1.0) -> Tensor:
    """Soft Dice over the batch: 1 - (2Σxy + eps) / (Σx + Σy + eps), x = sigmoid(logits)"""
    pred_logits = ad.as_tensor(pred_logits)
    target = ad.as_tensor(target_mask)
    if pred_logits.shape != target.shape:
        raise DimensionError(f"dice_loss: prediction {pred_logits.shape} vs target {target.shape}")
    if not np.all((target.data == 0.0) | (target.data == 1.0)):
        raise ConfigurationError("dice_loss: target mask must be binary {0, 1}")
    probs = ad.sigmoid(pred_logits)
    intersection = ad.sum_reduce(ad.mul(probs, target))
    numerator = ad.add(ad.scalar_mul(intersection, 2.0), eps)
    denominator = ad.add(ad.add(ad.sum_reduce(probs), ad.sum_reduce(target)), eps)
    return ad.sub(1.0, ad.div(numerator, denominator))


def total_loss(out: NetworkOutput, mask, boundary_mask) -> Tuple[Tensor, LossComponents]:
    """L_seg(main, mask) + L_TB(boundary head, boundary mask) + L_IB(body head, mask), unit weights"""
    l_seg = dice_loss(out.main_logits, mask)
    l_tb = dice_loss(out.aux_boundary_logits, boundary_mask)
    l_ib = dice_loss(out.aux_body_logits, mask)
    total = ad.add(ad.add(l_seg, l_tb), l_ib)
    return total, LossComponents(l_seg=l_seg.item(), l_tb=l_tb.item(), l_ib=l_ib.item(), total=total.item())


# ---------------------------------------------------------------- reporting

def count_params(model: ConductionNet) -> int:
    return sum(t.size for t in model.parameters())


PARAM_GROUPS = ("embed", "pos", "tcia", "tcbm", "ffn", "norm", "decoder", "head")


def param_breakdown(model: ConductionNet) -> Dict[str, int]:
    """Learnable scalars per module family; block and stage norms count as norm"""
    counts = {group: 0 for group in PARAM_GROUPS}
    for name, tensor in model.named_parameters():
        parts = name.split(".")
        group = next((p for p in parts if p in PARAM_GROUPS), "norm")
        counts[group] += tensor.size
    return counts
