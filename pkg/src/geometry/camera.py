"""
Pinhole intrinsics and SE(3) poses, plus their on-disk formats:
intrinsics as JSON {fx, fy, cx, cy, width, height}, poses as one 3x4
row-major line per pose.
"""
import json
import os
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import torch
from pydantic import BaseModel, ConfigDict, model_validator

from src.utils.errors import ConfigurationError, DatasetIOError
from src.utils.logger import setup_logger

logger = setup_logger(__name__)


class CameraIntrinsics(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    @model_validator(mode="after")
    def _check(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not 0 <= self.cx < self.width:
            raise ValueError(f"cx={self.cx} outside [0, {self.width})")
        if not 0 <= self.cy < self.height:
            raise ValueError(f"cy={self.cy} outside [0, {self.height})")
        return self

    @classmethod
    def centered(cls, width: int, height: int, focal: Optional[float] = None) -> "CameraIntrinsics":
        """Principal point at the image center, focal length defaulting to the width."""
        f = float(focal if focal is not None else width)
        return cls(fx=f, fy=f, cx=(width - 1) / 2.0, cy=(height - 1) / 2.0, width=width, height=height)

    def matrix(self, dtype=torch.float32) -> torch.Tensor:
        return torch.tensor([[self.fx, 0.0, self.cx],
                             [0.0, self.fy, self.cy],
                             [0.0, 0.0, 1.0]], dtype=dtype)

    def scaled(self, factor: float) -> "CameraIntrinsics":
        """Intrinsics for an image resized by `factor` (pixel centers at integers)."""
        width = max(1, int(round(self.width * factor)))
        height = max(1, int(round(self.height * factor)))
        return CameraIntrinsics(
            fx=self.fx * factor, fy=self.fy * factor,
            cx=(self.cx + 0.5) * factor - 0.5, cy=(self.cy + 0.5) * factor - 0.5,
            width=width, height=height,
        )


@dataclass(frozen=True)
class Pose:
    """Rigid transform x' = R x + t (float64)."""
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if not np.allclose(R.T @ R, np.eye(3), atol=1e-6):
            raise ConfigurationError("Pose rotation is not orthonormal (R^T R != I)")
        if abs(np.linalg.det(R) - 1.0) > 1e-6:
            raise ConfigurationError(f"Pose rotation has det {np.linalg.det(R):.6f}, expected 1")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, matrix) -> "Pose":
        m = np.asarray(matrix, dtype=np.float64)
        return cls(m[:3, :3], m[:3, 3])

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def as_tensor(self, dtype=torch.float32) -> torch.Tensor:
        return torch.from_numpy(self.matrix()).to(dtype)

    def inverse(self) -> "Pose":
        R_inv = self.rotation.T
        return Pose(R_inv, -R_inv @ self.translation)

    def compose(self, other: "Pose") -> "Pose":
        """self ∘ other: apply `other` first."""
        return Pose(self.rotation @ other.rotation, self.rotation @ other.translation + self.translation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        return points @ self.rotation.T + self.translation


SMALL_ANGLE = 1e-4


def axis_angle_to_matrix(axis_angle: torch.Tensor, translation: torch.Tensor) -> torch.Tensor:
    """
    Rodrigues formula, batched and differentiable.
    axis_angle, translation: (B, 3) -> (B, 4, 4)

    R = I + a [w]x + b [w]x^2 on the unnormalized vector w, with
    a = sin(theta)/theta and b = (1 - cos(theta))/theta^2 = 2 sin^2(theta/2)/theta^2. Below SMALL_ANGLE
    both switch to their Taylor series, so dR/dw stays exact at w = 0.
    """
    theta_sq = (axis_angle * axis_angle).sum(dim=-1, keepdim=True)
    small = theta_sq < SMALL_ANGLE ** 2
    theta = torch.sqrt(torch.where(small, torch.ones_like(theta_sq), theta_sq))
    a = torch.where(small, 1.0 - theta_sq / 6.0, torch.sin(theta) / theta)[..., None]
    b = torch.where(small, 0.5 - theta_sq / 24.0, 2.0 * torch.sin(0.5 * theta) ** 2 / (theta * theta))[..., None]

    x, y, z = axis_angle[..., 0], axis_angle[..., 1], axis_angle[..., 2]
    zeros = torch.zeros_like(x)
    skew = torch.stack([
        torch.stack([zeros, -z, y], dim=-1),
        torch.stack([z, zeros, -x], dim=-1),
        torch.stack([-y, x, zeros], dim=-1),
    ], dim=-2)
    eye = torch.eye(3, dtype=axis_angle.dtype, device=axis_angle.device).expand_as(skew)
    rot = eye + a * skew + b * (skew @ skew)

    batch = axis_angle.shape[:-1]
    top = torch.cat([rot, translation[..., :, None]], dim=-1)
    bottom = torch.zeros(*batch, 1, 4, dtype=axis_angle.dtype, device=axis_angle.device)
    bottom[..., 0, 3] = 1.0
    return torch.cat([top, bottom], dim=-2)


def axis_angle_to_pose(axis_angle, translation) -> Pose:
    aa = torch.as_tensor(np.asarray(axis_angle, dtype=np.float64)).reshape(1, 3)
    t = torch.as_tensor(np.asarray(translation, dtype=np.float64)).reshape(1, 3)
    return Pose.from_matrix(axis_angle_to_matrix(aa, t)[0].numpy())


def pose_to_line(pose: Pose) -> str:
    values = pose.matrix()[:3, :].reshape(-1)
    return " ".join(repr(float(v)) for v in values)


def parse_pose_line(line: str) -> Pose:
    parts = line.split()
    if len(parts) != 12:
        raise ConfigurationError(f"Pose line must hold 12 values (3x4 row-major), got {len(parts)}")
    try:
        values = np.array([float(p) for p in parts], dtype=np.float64).reshape(3, 4)
    except ValueError as e:
        raise ConfigurationError(f"Pose line is not numeric: {e}") from e
    return Pose(values[:, :3], values[:, 3])


def save_poses(poses: List[Pose], file_path: str):
    try:
        with open(file_path, "w", encoding="utf-8", newline="\n") as f:
            for pose in poses:
                f.write(pose_to_line(pose) + "\n")
    except OSError as e:
        raise DatasetIOError(f"Could not write poses {file_path}: {e}") from e


def load_poses(file_path: str) -> List[Pose]:
    if not os.path.exists(file_path):
        raise DatasetIOError(f"Pose file not found: {file_path}")
    with open(file_path, "r", encoding="utf-8") as f:
        return [parse_pose_line(line) for line in f if line.strip()]


def save_intrinsics(intrinsics: CameraIntrinsics, file_path: str):
    try:
        with open(file_path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(intrinsics.model_dump(), f, indent=2, sort_keys=True)
            f.write("\n")
    except OSError as e:
        raise DatasetIOError(f"Could not write intrinsics {file_path}: {e}") from e


def load_intrinsics(file_path: str) -> CameraIntrinsics:
    if not os.path.exists(file_path):
        raise DatasetIOError(f"Intrinsics file not found: {file_path}")
    with open(file_path, "r", encoding="utf-8") as f:
        data = json.load(f)
    try:
        return CameraIntrinsics(**data)
    except ValueError as e:
        raise ConfigurationError(f"Invalid intrinsics in {file_path}: {e}") from e
