"""
DPT-style decoder: a neck that reassembles tokens from four tapped blocks
into feature maps, and a head that fuses them coarse-to-fine, emitting a
sigmoid disparity at 1/8, 1/4, 1/2 and 1/1 of the input resolution.
"""
from typing import List

import torch
import torch.nn as nn
import torch.nn.functional as F
from pydantic import BaseModel, ConfigDict, model_validator

NUM_SCALES = 4


class DecoderConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    features: int = 32
    min_depth: float = 0.1
    max_depth: float = 100.0

    @model_validator(mode="after")
    def _check(self):
        if self.features < 1:
            raise ValueError("features must be >= 1")
        if not 0 < self.min_depth < self.max_depth:
            raise ValueError(f"need 0 < min_depth < max_depth, got {self.min_depth}, {self.max_depth}")
        return self


def tap_blocks(blocks: int) -> List[int]:
    """Zero-based indices of the blocks feeding the neck ({3, 6, 9, 12} of 12)."""
    return [max(1, (blocks * k) // NUM_SCALES) - 1 for k in range(1, NUM_SCALES + 1)]


class ResidualConvUnit(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1)
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1)

    def forward(self, x):
        out = self.conv1(F.relu(x))
        out = self.conv2(F.relu(out))
        return x + out


class DepthDecoder(nn.Module):
    def __init__(self, embed_dim: int, blocks: int, grid: tuple, class_token: bool, cfg: DecoderConfig):
        super().__init__()
        self.cfg = cfg
        self.taps = tap_blocks(blocks)
        self.grid = grid
        self.class_token = class_token
        # neck: one projection per tapped block
        self.reassemble = nn.ModuleList([nn.Conv2d(embed_dim, cfg.features, 1) for _ in range(NUM_SCALES)])
        self.fusion = nn.ModuleList([ResidualConvUnit(cfg.features) for _ in range(NUM_SCALES)])
        # head: one disparity output per scale
        self.heads = nn.ModuleList([nn.Conv2d(cfg.features, 1, 3, padding=1) for _ in range(NUM_SCALES)])

    def _to_map(self, tokens: torch.Tensor) -> torch.Tensor:
        if self.class_token:
            tokens = tokens[:, 1:]
        B, N, D = tokens.shape
        gh, gw = self.grid
        return tokens.transpose(1, 2).reshape(B, D, gh, gw)

    def forward(self, features: List[torch.Tensor], image_size: tuple) -> List[torch.Tensor]:
        """Returns disparities ordered from full resolution (scale 0) to 1/8 (scale 3)."""
        height, width = image_size
        maps = [proj(self._to_map(features[t])) for proj, t in zip(self.reassemble, self.taps)]

        disparities = [None] * NUM_SCALES
        x = None
        for scale in reversed(range(NUM_SCALES)):
            size = (height >> scale, width >> scale)
            skip = F.interpolate(maps[scale], size=size, mode="bilinear", align_corners=False)
            if x is None:
                x = skip
            else:
                x = F.interpolate(x, size=size, mode="bilinear", align_corners=False) + skip
            x = self.fusion[scale](x)
            disparities[scale] = torch.sigmoid(self.heads[scale](x))
        return disparities
