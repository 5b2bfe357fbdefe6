"""
Differentiable view synthesis.
Target pixels are backprojected with the target depth, moved into the
source camera by T_target_to_source, projected with K, and the source image
is bilinearly sampled at the resulting coordinates.

Conventions: images (B, C, H, W), depth (B, 1, H, W), K (B, 3, 3) or (3, 3),
T (B, 4, 4) or (4, 4). Pixel centers sit at integer coordinates.
"""
from dataclasses import dataclass
from typing import Optional, Tuple

import torch
import torch.nn.functional as F

from src.geometry.camera import CameraIntrinsics
from src.utils.errors import ShapeError

# Minimum transformed depth; pixels below it are masked.
EPS_Z = 1e-6


@dataclass
class PixelGrid:
    coords: torch.Tensor        # (B, H, W, 2) pixel x, y
    valid_mask: torch.Tensor    # (B, H, W) bool
    depth: Optional[torch.Tensor] = None  # (B, H, W) depth in the source camera


def pixel_grid(height: int, width: int, dtype=torch.float32, device=None) -> torch.Tensor:
    """(H, W, 2) integer pixel coordinates (x, y)."""
    ys, xs = torch.meshgrid(
        torch.arange(height, dtype=dtype, device=device),
        torch.arange(width, dtype=dtype, device=device),
        indexing="ij",
    )
    return torch.stack([xs, ys], dim=-1)


def _as_batched(matrix, batch: int, size: int, like: torch.Tensor) -> torch.Tensor:
    if isinstance(matrix, CameraIntrinsics):
        matrix = matrix.matrix()
    m = torch.as_tensor(matrix).to(dtype=like.dtype, device=like.device)
    if m.dim() == 2:
        m = m.expand(batch, size, size)
    if m.shape != (batch, size, size):
        raise ShapeError(f"Expected ({batch}, {size}, {size}) matrices, got {tuple(m.shape)}")
    return m


def reproject(depth_target: torch.Tensor, K, T_target_to_source,
              pixel_coords: Optional[torch.Tensor] = None) -> PixelGrid:
    """
    Pixel coordinates in the source view for every target pixel.
    `pixel_coords` (B, H, W, 2) overrides the integer target grid, which lets
    continuous coordinates be carried through a second warp.
    """
    if depth_target.dim() != 4 or depth_target.shape[1] != 1:
        raise ShapeError(f"depth must be (B, 1, H, W), got {tuple(depth_target.shape)}")
    batch, _, height, width = depth_target.shape
    K = _as_batched(K, batch, 3, depth_target)
    T = _as_batched(T_target_to_source, batch, 4, depth_target)

    if pixel_coords is None:
        pixel_coords = pixel_grid(height, width, depth_target.dtype, depth_target.device).expand(batch, height, width, 2)
    ones = torch.ones_like(pixel_coords[..., :1])
    pix = torch.cat([pixel_coords, ones], dim=-1).reshape(batch, -1, 3).transpose(1, 2)  # (B, 3, N)

    rays = torch.linalg.solve(K, pix)
    cam_points = depth_target.reshape(batch, 1, -1) * rays
    moved = T[:, :3, :3] @ cam_points + T[:, :3, 3:]
    projected = K @ moved

    z = projected[:, 2:3, :]
    in_front = z > EPS_Z
    # masked pixels divide by 1 so neither values nor gradients blow up
    safe_z = torch.where(in_front, z, torch.ones_like(z))
    xy = projected[:, :2, :] / safe_z

    coords = xy.transpose(1, 2).reshape(batch, height, width, 2)
    in_front = in_front.reshape(batch, height, width)
    x, y = coords[..., 0], coords[..., 1]
    inside = (x >= 0) & (x <= width - 1) & (y >= 0) & (y <= height - 1)
    return PixelGrid(coords=coords, valid_mask=in_front & inside,
                     depth=moved[:, 2, :].reshape(batch, height, width))


def _normalize(coord: torch.Tensor, size: int) -> torch.Tensor:
    if size == 1:
        return torch.zeros_like(coord)
    return 2.0 * coord / (size - 1) - 1.0


def bilinear_sample(source: torch.Tensor, grid) -> torch.Tensor:
    """
    Bilinear interpolation of `source` (B, C, H, W) at pixel coordinates
    (PixelGrid or (B, H_out, W_out, 2) tensor), clamping to the border.
    """
    coords = grid.coords if isinstance(grid, PixelGrid) else grid
    if source.dim() != 4:
        raise ShapeError(f"source must be (B, C, H, W), got {tuple(source.shape)}")
    if coords.dim() != 4 or coords.shape[0] != source.shape[0] or coords.shape[-1] != 2:
        raise ShapeError(f"grid {tuple(coords.shape)} does not match source {tuple(source.shape)}")
    height, width = source.shape[-2:]
    normalized = torch.stack([_normalize(coords[..., 0], width), _normalize(coords[..., 1], height)], dim=-1)
    return F.grid_sample(source, normalized.to(source.dtype), mode="bilinear",
                         padding_mode="border", align_corners=True)


def synthesize_view(source_img: torch.Tensor, depth_target: torch.Tensor, K,
                    T_target_to_source) -> Tuple[torch.Tensor, torch.Tensor]:
    """Warps the source image into the target view; returns (warped, valid_mask)."""
    grid = reproject(depth_target, K, T_target_to_source)
    if source_img.shape[-2:] != depth_target.shape[-2:]:
        raise ShapeError(
            f"source image {tuple(source_img.shape[-2:])} and depth {tuple(depth_target.shape[-2:])} differ in size"
        )
    return bilinear_sample(source_img, grid), grid.valid_mask
