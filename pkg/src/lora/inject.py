"""
Injection of Vector-LoRA adapters into the encoder's attention projections,
the adaptation modes compared in ablations, and parameter accounting.
"""
from enum import Enum
from typing import Dict, List, Optional

import torch.nn as nn
from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.lora.layers import DEFAULT_RANK_VECTOR, LoraInjectionSpec, LoraLinear, RankVector
from src.utils.errors import ConfigurationError
from src.utils.logger import setup_logger

logger = setup_logger(__name__)


class AdaptationMode(str, Enum):
    FROZEN = "frozen"
    FULL = "full"
    LORA = "lora"
    VECTOR_LORA = "vector_lora"


def build_rank_vector(mode: AdaptationMode, blocks: int, ranks: Optional[List[int]] = None,
                      uniform_rank: int = 8) -> RankVector:
    """
    Rank vector for the LoRA modes.
    `lora` gives every block `uniform_rank`; `vector_lora` uses `ranks`
    (the 12-block default when omitted).
    """
    mode = AdaptationMode(mode)
    if mode == AdaptationMode.LORA:
        return RankVector(ranks=[uniform_rank] * blocks)
    if mode == AdaptationMode.VECTOR_LORA:
        return RankVector(ranks=list(ranks) if ranks is not None else list(DEFAULT_RANK_VECTOR))
    raise ConfigurationError(f"Adaptation mode '{mode.value}' does not use a rank vector")


def _freeze(module: nn.Module):
    for p in module.parameters():
        p.requires_grad = False


def inject_vector_lora(encoder: nn.Module, spec: LoraInjectionSpec) -> nn.Module:
    """
    Replaces each targeted projection of block i with a LoraLinear of rank
    ranks[i] and freezes every other encoder parameter. Modifies `encoder`
    in place and returns it.
    """
    blocks = encoder.blocks
    ranks = spec.rank_vector
    if len(ranks) != len(blocks):
        raise ConfigurationError(
            f"Rank vector has {len(ranks)} entries but the encoder has {len(blocks)} blocks"
        )
    if not ranks.is_non_increasing():
        logger.warning(f"Rank vector {ranks.ranks} is not non-increasing across blocks")

    _freeze(encoder)

    count = 0
    for i, block in enumerate(blocks):
        for name in spec.targets:
            base = getattr(block.attn, name)
            if isinstance(base, LoraLinear):
                raise ConfigurationError(f"Block {i} projection '{name}' already carries a LoRA adapter")
            setattr(block.attn, name, LoraLinear(base, rank=ranks[i], scale=spec.scale))
            count += 1

    logger.info(f"Injected {count} LoRA adapters (targets={spec.targets}, ranks={ranks.ranks})")
    return encoder


def apply_adaptation(encoder: nn.Module, mode: AdaptationMode,
                     spec: Optional[LoraInjectionSpec] = None) -> nn.Module:
    """Configures which encoder parameters train for the given mode."""
    mode = AdaptationMode(mode)
    if mode == AdaptationMode.FROZEN:
        _freeze(encoder)
        return encoder
    if mode == AdaptationMode.FULL:
        for p in encoder.parameters():
            p.requires_grad = True
        return encoder
    if spec is None:
        raise ConfigurationError(f"Adaptation mode '{mode.value}' requires a LoRA injection spec")
    return inject_vector_lora(encoder, spec)


def lora_modules(module: nn.Module) -> List[LoraLinear]:
    return [m for m in module.modules() if isinstance(m, LoraLinear)]


def trainable_param_count(encoder: nn.Module) -> int:
    """Sum over adapted projections of r * (d + k)."""
    return sum(m.rank * (m.out_features + m.in_features) for m in lora_modules(encoder))


def count_trainable_parameters(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters() if p.requires_grad)


def parameter_summary(groups: Dict[str, nn.Module]) -> Dict[str, float]:
    """
    Total / trainable counts per named group (e.g. encoder, decoder, pose),
    plus the LoRA-only count and the overall trainable fraction.
    """
    summary: Dict[str, float] = {}
    total = trainable = 0
    lora = 0
    for name, module in groups.items():
        group_total = sum(p.numel() for p in module.parameters())
        group_trainable = count_trainable_parameters(module)
        summary[f"{name}_total"] = group_total
        summary[f"{name}_trainable"] = group_trainable
        total += group_total
        trainable += group_trainable
        lora += trainable_param_count(module)
    summary["total"] = total
    summary["trainable"] = trainable
    summary["lora"] = lora
    summary["trainable_fraction"] = trainable / total if total else 0.0
    return summary


class AdaptationConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    mode: AdaptationMode = AdaptationMode.VECTOR_LORA
    ranks: List[int] = Field(default_factory=lambda: list(DEFAULT_RANK_VECTOR))
    uniform_rank: int = 8
    targets: List[str] = Field(default_factory=lambda: ["q", "v"])
    scale: float = 1.0

    @field_validator("uniform_rank")
    @classmethod
    def _check_uniform_rank(cls, rank: int) -> int:
        if rank < 1:
            raise ValueError(f"uniform_rank must be >= 1, got {rank}")
        return rank

    def injection_spec(self, blocks: int) -> Optional[LoraInjectionSpec]:
        if self.mode in (AdaptationMode.FROZEN, AdaptationMode.FULL):
            return None
        rank_vector = build_rank_vector(self.mode, blocks, self.ranks, self.uniform_rank)
        return LoraInjectionSpec(targets=self.targets, rank_vector=rank_vector, scale=self.scale)
