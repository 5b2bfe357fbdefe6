"""
Vector-LoRA layers.
A LoraLinear keeps a frozen base projection W0 (plus its bias) and adds a
trainable low-rank path: h = W0 x + scale * B (A x).
"""
from typing import List

import torch
import torch.nn as nn
import torch.nn.functional as F
from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.utils.errors import ConfigurationError, ShapeError
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

# Per-block ranks for a 12-block encoder, decreasing with depth.
DEFAULT_RANK_VECTOR = [14, 14, 12, 12, 10, 10, 8, 8, 8, 8, 8, 8]

VALID_TARGETS = {"q", "k", "v", "o"}


class RankVector(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    ranks: List[int] = Field(default_factory=lambda: list(DEFAULT_RANK_VECTOR))

    @field_validator("ranks")
    @classmethod
    def _check_ranks(cls, ranks: List[int]) -> List[int]:
        if not ranks:
            raise ValueError("rank vector must not be empty")
        bad = [r for r in ranks if r < 1]
        if bad:
            raise ValueError(f"every rank must be >= 1, got {bad}")
        return ranks

    def __len__(self) -> int:
        return len(self.ranks)

    def __getitem__(self, index: int) -> int:
        return self.ranks[index]

    def is_non_increasing(self) -> bool:
        return all(a >= b for a, b in zip(self.ranks, self.ranks[1:]))


class LoraInjectionSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    targets: List[str] = Field(default_factory=lambda: ["q", "v"])
    rank_vector: RankVector = Field(default_factory=RankVector)
    scale: float = 1.0

    @field_validator("targets")
    @classmethod
    def _check_targets(cls, targets: List[str]) -> List[str]:
        unknown = set(targets) - VALID_TARGETS
        if unknown:
            raise ValueError(f"unknown LoRA targets {sorted(unknown)}; valid: {sorted(VALID_TARGETS)}")
        if not targets:
            raise ValueError("at least one LoRA target is required")
        # sorted so the serialized config (and its hash) is stable
        return sorted(set(targets))

    @field_validator("scale")
    @classmethod
    def _check_scale(cls, scale: float) -> float:
        if not scale > 0:
            raise ValueError(f"scale must be > 0, got {scale}")
        return scale


class LoraLinear(nn.Module):
    """Wraps an nn.Linear with a rank-r adapter; the wrapped weights are frozen."""

    def __init__(self, base: nn.Linear, rank: int, scale: float = 1.0, init_std: float = 0.02):
        super().__init__()
        d, k = base.out_features, base.in_features
        if not 1 <= rank < min(d, k):
            raise ConfigurationError(f"LoRA rank {rank} must satisfy 1 <= r < min(d={d}, k={k})")

        self.base = base
        for p in self.base.parameters():
            p.requires_grad = False

        self.rank = rank
        self.scale = scale
        self.in_features = k
        self.out_features = d

        self.lora_A = nn.Parameter(torch.empty(rank, k, dtype=base.weight.dtype))
        self.lora_B = nn.Parameter(torch.zeros(d, rank, dtype=base.weight.dtype))
        nn.init.normal_(self.lora_A, mean=0.0, std=init_std)

    @property
    def weight(self) -> torch.Tensor:
        return self.base.weight

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        base_out = F.linear(x, self.base.weight, self.base.bias)
        update = (x @ self.lora_A.t()) @ self.lora_B.t()
        return base_out + self.scale * update

    def extra_repr(self) -> str:
        return f"in_features={self.in_features}, out_features={self.out_features}, rank={self.rank}, scale={self.scale}"


def lora_forward(layer: LoraLinear, x: torch.Tensor) -> torch.Tensor:
    """Applies h = W0 x + scale * B A x, checking the input width first."""
    if x.shape[-1] != layer.in_features:
        raise ShapeError(f"LoRA input has {x.shape[-1]} features, layer expects {layer.in_features}")
    return layer(x)
