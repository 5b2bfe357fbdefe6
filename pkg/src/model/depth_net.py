"""
Depth network: transformer encoder + DPT-style decoder producing a
4-resolution disparity pyramid, and the disparity <-> depth mapping.
"""
from dataclasses import dataclass
from typing import List

import torch
import torch.nn as nn

from src.model.decoder import DecoderConfig, DepthDecoder
from src.model.encoder import EncoderConfig, TransformerEncoder
from src.utils.errors import ShapeError
from src.utils.validators import validate_divisible


@dataclass
class DepthPyramid:
    disparities: List[torch.Tensor]  # scale i is (B, 1, H / 2^i, W / 2^i)
    min_depth: float
    max_depth: float

    def depth(self, scale: int = 0) -> torch.Tensor:
        return disparity_to_depth(self.disparities[scale], self.min_depth, self.max_depth)


def disparity_to_depth(disp, min_depth: float, max_depth: float):
    """Maps disparity in [0, 1] to depth in [min_depth, max_depth], decreasing in disp."""
    min_disp = 1.0 / max_depth
    max_disp = 1.0 / min_depth
    return 1.0 / (min_disp + (max_disp - min_disp) * disp)


def depth_to_disparity(depth, min_depth: float, max_depth: float):
    """Inverse of disparity_to_depth."""
    min_disp = 1.0 / max_depth
    max_disp = 1.0 / min_depth
    return (1.0 / depth - min_disp) / (max_disp - min_disp)


class DepthNet(nn.Module):
    def __init__(self, encoder_cfg: EncoderConfig = EncoderConfig(), decoder_cfg: DecoderConfig = DecoderConfig()):
        super().__init__()
        self.encoder_cfg = encoder_cfg
        self.decoder_cfg = decoder_cfg
        self.encoder = TransformerEncoder(encoder_cfg)
        self.decoder = DepthDecoder(encoder_cfg.embed_dim, encoder_cfg.blocks, encoder_cfg.grid,
                                    encoder_cfg.class_token, decoder_cfg)

    def forward(self, image: torch.Tensor) -> DepthPyramid:
        if image.dim() != 4 or image.shape[1] != 3:
            raise ShapeError(f"image must be (B, 3, H, W), got {tuple(image.shape)}")
        validate_divisible("image size", tuple(image.shape[-2:]), self.encoder_cfg.patch_size * 8)
        features = self.encoder(image)
        disparities = self.decoder(features, tuple(image.shape[-2:]))
        return DepthPyramid(disparities, self.decoder_cfg.min_depth, self.decoder_cfg.max_depth)


def depth_forward(model: DepthNet, image: torch.Tensor) -> DepthPyramid:
    return model(image)
