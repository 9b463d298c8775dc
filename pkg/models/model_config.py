# model_config.py - Architectural hyperparameters of the detection network

from dataclasses import dataclass, replace
from typing import Tuple

from services.errors import ConfigurationError

ABLATION_VARIANTS = {
    "baseline": (False, False),
    "tcia": (True, False),
    "tcbm": (False, True),
    "full": (True, True),
}


@dataclass
class ModelConfig:
    stage_channels: Tuple[int, int, int, int] = (16, 32, 64, 128)
    blocks_per_stage: Tuple[int, int, int, int] = (2, 2, 2, 2)
    heads_per_stage: Tuple[int, int, int, int] = (1, 2, 4, 8)
    stage_strides: Tuple[int, int, int, int] = (4, 2, 2, 2)
    ffn_expansion: int = 4
    input_size: Tuple[int, int] = (64, 64)
    use_tcia: bool = True
    use_tcbm: bool = True
    gamma_init: float = 0.2
    h_step_init: float = 1.0
    qk_ratio: float = 0.5
    v_ratio: float = 0.5
    aux_stage: int = 1  # encoder stage (1-4) whose branch deltas feed the body/boundary heads

    @property
    def total_stride(self) -> int:
        total = 1
        for s in self.stage_strides:
            total *= s
        return total

    def attention_dims(self, stage: int) -> Tuple[int, int]:
        channels = self.stage_channels[stage]
        return int(channels * self.qk_ratio), int(channels * self.v_ratio)

    def validate(self) -> None:
        for name in ("stage_channels", "blocks_per_stage", "heads_per_stage", "stage_strides"):
            values = getattr(self, name)
            if len(values) != 4:
                raise ConfigurationError(f"{name} needs 4 entries, got {values}")
            if min(values) < 1:
                raise ConfigurationError(f"{name} entries must be positive, got {values}")
        height, width = self.input_size
        if height % self.total_stride or width % self.total_stride:
            raise ConfigurationError(
                f"input size {self.input_size} must be divisible by {self.total_stride}"
            )
        for stage, (channels, heads) in enumerate(zip(self.stage_channels, self.heads_per_stage)):
            if channels % 4:
                raise ConfigurationError(f"stage {stage + 1}: {channels} channels not divisible by 4 shift groups")
            if channels % heads:
                raise ConfigurationError(f"stage {stage + 1}: {channels} channels not divisible by {heads} heads")
            c_qk, c_v = self.attention_dims(stage)
            if c_qk < heads or c_qk % heads or c_v < heads or c_v % heads:
                raise ConfigurationError(
                    f"stage {stage + 1}: C_qk={c_qk}/C_v={c_v} not divisible by {heads} heads"
                )
        if self.ffn_expansion < 1:
            raise ConfigurationError(f"ffn_expansion must be >= 1, got {self.ffn_expansion}")
        if self.aux_stage not in (1, 2, 3, 4):
            raise ConfigurationError(f"aux_stage must be 1-4, got {self.aux_stage}")

    def variant(self, name: str) -> "ModelConfig":
        """Copy with the ablation toggles of a named variant"""
        if name not in ABLATION_VARIANTS:
            raise ConfigurationError(f"Unknown variant {name!r}; choose from {', '.join(ABLATION_VARIANTS)}")
        use_tcia, use_tcbm = ABLATION_VARIANTS[name]
        return replace(self, use_tcia=use_tcia, use_tcbm=use_tcbm)


def tiny_config(input_size: Tuple[int, int] = (32, 32)) -> ModelConfig:
    """Smallest legal configuration, used by the gradient-check suite"""
    return ModelConfig(
        stage_channels=(8, 8, 8, 8),
        blocks_per_stage=(1, 1, 1, 1),
        heads_per_stage=(1, 1, 1, 1),
        input_size=input_size,
        ffn_expansion=2,
    )
