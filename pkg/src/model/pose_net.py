"""
PoseNet: frames concatenated channel-wise -> strided conv encoder ->
global average pool -> 6 values (axis-angle, translation) scaled by 0.01.
"""
from dataclasses import dataclass
from typing import List

import torch
import torch.nn as nn
from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.geometry.camera import axis_angle_to_matrix
from src.utils.validators import validate_same_shape

OUTPUT_SCALE = 0.01


class PoseNetConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    channels: List[int] = Field(default_factory=lambda: [16, 32, 64, 128])

    @field_validator("channels")
    @classmethod
    def _check_channels(cls, channels: List[int]) -> List[int]:
        if not channels or any(c < 1 for c in channels):
            raise ValueError(f"channels must be a non-empty list of positive ints, got {channels}")
        return channels


@dataclass
class PoseEstimate:
    axis_angle: torch.Tensor   # (B, 3), already scaled
    translation: torch.Tensor  # (B, 3), already scaled

    def matrix(self) -> torch.Tensor:
        """(B, 4, 4) rigid transform mapping frame_a camera points into frame_b's camera."""
        return axis_angle_to_matrix(self.axis_angle, self.translation)


class PoseNet(nn.Module):
    def __init__(self, cfg: PoseNetConfig = PoseNetConfig()):
        super().__init__()
        layers = []
        in_ch = 6
        for out_ch in cfg.channels:
            layers += [nn.Conv2d(in_ch, out_ch, 3, stride=2, padding=1), nn.ReLU(inplace=True)]
            in_ch = out_ch
        self.encoder = nn.Sequential(*layers)
        self.pose = nn.Conv2d(in_ch, 6, 1)

    def forward(self, frame_a: torch.Tensor, frame_b: torch.Tensor) -> PoseEstimate:
        validate_same_shape("frame_a", frame_a, "frame_b", frame_b)
        x = self.encoder(torch.cat([frame_a, frame_b], dim=1))
        out = self.pose(x).mean(dim=(2, 3)) * OUTPUT_SCALE
        return PoseEstimate(axis_angle=out[:, :3], translation=out[:, 3:])


def pose_forward(pose_net: PoseNet, frame_a: torch.Tensor, frame_b: torch.Tensor) -> PoseEstimate:
    return pose_net(frame_a, frame_b)
