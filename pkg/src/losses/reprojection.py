"""
Self-supervised photometric objective:
per scale, warp every source frame into the target view with the predicted
depth and pose, score the reconstruction with
    alpha * (1 - MS-SSIM) + beta * mean |target - estimate|,
add edge-aware disparity smoothness, and average over scales.
"""
from typing import Dict, List, Literal, Optional, Tuple

import torch
import torch.nn.functional as F
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.geometry.warp import synthesize_view
from src.losses.ssim import MsSsimConfig, ms_ssim, ssim_dissimilarity_map
from src.model.depth_net import DepthPyramid, disparity_to_depth
from src.utils.errors import ShapeError
from src.utils.logger import setup_logger
from src.utils.validators import validate_same_shape

logger = setup_logger(__name__)


class ReprojectionLossConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    # `ssim` is the single-scale per-pixel SSIM + L1 baseline
    kind: Literal["ms_ssim", "ssim"] = "ms_ssim"
    alpha: float = 0.9
    beta: float = 0.1
    smoothness_weight: float = 1e-3
    per_pixel_min: bool = True
    scales: List[int] = Field(default_factory=lambda: [0, 1, 2, 3])
    ms_ssim: MsSsimConfig = Field(default_factory=lambda: MsSsimConfig(auto_reduce=True))

    @model_validator(mode="after")
    def _check(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError(f"alpha and beta must be >= 0, got {self.alpha}, {self.beta}")
        if self.smoothness_weight < 0:
            raise ValueError("smoothness_weight must be >= 0")
        return self

    @field_validator("scales")
    @classmethod
    def _check_scales(cls, scales: List[int]) -> List[int]:
        if not scales:
            raise ValueError("at least one loss scale is required")
        bad = [s for s in scales if s not in (0, 1, 2, 3)]
        if bad:
            raise ValueError(f"loss scales must be within 0..3, got {bad}")
        return sorted(set(scales))

    @classmethod
    def ssim_baseline(cls, **overrides) -> "ReprojectionLossConfig":
        """Single-scale per-pixel SSIM + L1 with the usual 0.85 / 0.15 weighting."""
        return cls(**{"kind": "ssim", "alpha": 0.85, "beta": 0.15, **overrides})


def ms_reprojection_loss(target: torch.Tensor, estimate: torch.Tensor,
                         mask: Optional[torch.Tensor] = None,
                         cfg: ReprojectionLossConfig = ReprojectionLossConfig()) -> torch.Tensor:
    """
    alpha * (1 - MS-SSIM(target, estimate)) + beta * L1, with L1 averaged over
    valid pixels. Invalid pixels take the target's value inside the SSIM term,
    so they count as perfectly reconstructed there. An empty mask gives 0.
    """
    validate_same_shape("target", target, "estimate", estimate)
    if mask is None:
        mask = torch.ones(target.shape[0], *target.shape[-2:], dtype=torch.bool, device=target.device)
    if mask.shape != (target.shape[0], *target.shape[-2:]):
        raise ShapeError(f"mask {tuple(mask.shape)} does not match images {tuple(target.shape)}")

    weight = mask[:, None].to(target.dtype)
    valid = weight.sum()
    if valid.item() == 0:
        logger.warning("Reprojection mask is empty; loss defined as 0")
        return (estimate * 0.0).sum()

    l1 = ((target - estimate).abs() * weight).sum() / (valid * target.shape[1])
    filled = torch.where(mask[:, None], estimate, target)
    if cfg.kind == "ms_ssim":
        structural = 1.0 - ms_ssim(target, filled, cfg.ms_ssim)
    else:
        dissim = ssim_dissimilarity_map(target, filled, cfg.ms_ssim.ssim)
        structural = (dissim * weight).sum() / (valid * target.shape[1])
    return cfg.alpha * structural + cfg.beta * l1


def edge_aware_smoothness(disparity: torch.Tensor, image: torch.Tensor) -> torch.Tensor:
    """Mean-normalized disparity gradients, down-weighted at image edges."""
    if disparity.shape[0] != image.shape[0] or disparity.shape[-2:] != image.shape[-2:]:
        raise ShapeError(f"disparity {tuple(disparity.shape)} and image {tuple(image.shape)} differ")
    mean_disp = disparity.mean(dim=(2, 3), keepdim=True)
    norm_disp = disparity / (mean_disp + 1e-7)

    grad_disp_x = (norm_disp[:, :, :, :-1] - norm_disp[:, :, :, 1:]).abs()
    grad_disp_y = (norm_disp[:, :, :-1, :] - norm_disp[:, :, 1:, :]).abs()
    grad_img_x = (image[:, :, :, :-1] - image[:, :, :, 1:]).abs().mean(1, keepdim=True)
    grad_img_y = (image[:, :, :-1, :] - image[:, :, 1:, :]).abs().mean(1, keepdim=True)

    grad_disp_x = grad_disp_x * torch.exp(-grad_img_x)
    grad_disp_y = grad_disp_y * torch.exp(-grad_img_y)
    return grad_disp_x.mean() + grad_disp_y.mean()


def _select_per_pixel(target: torch.Tensor, warped: List[torch.Tensor],
                      masks: List[torch.Tensor]) -> Tuple[torch.Tensor, torch.Tensor]:
    """For each pixel keep the source reconstruction with the lowest L1 error."""
    errors = []
    for estimate, mask in zip(warped, masks):
        err = (target - estimate).abs().mean(1)
        errors.append(torch.where(mask, err, torch.full_like(err, float("inf"))))
    best = torch.stack(errors, dim=1).argmin(dim=1, keepdim=True)  # (B, 1, H, W)

    stacked = torch.stack(warped, dim=1)  # (B, S, C, H, W)
    index = best[:, :, None].expand(-1, 1, target.shape[1], -1, -1)
    estimate = stacked.gather(1, index).squeeze(1)
    mask = torch.stack(masks, dim=1).gather(1, best).squeeze(1)
    return estimate, mask


def total_ssl_loss(target: torch.Tensor, sources: Dict[int, torch.Tensor], pyramid: DepthPyramid,
                   poses: Dict[int, torch.Tensor], K: torch.Tensor,
                   cfg: ReprojectionLossConfig = ReprojectionLossConfig()) -> Tuple[torch.Tensor, Dict[str, float]]:
    """
    target (B, 3, H, W); sources {offset: (B, 3, H, W)};
    poses {offset: (B, 4, 4) target-to-source}. Returns (loss, breakdown).
    """
    if set(sources) != set(poses):
        raise ShapeError(f"source offsets {sorted(sources)} and pose offsets {sorted(poses)} differ")
    missing = [s for s in cfg.scales if s >= len(pyramid.disparities)]
    if missing:
        raise ShapeError(f"depth pyramid has {len(pyramid.disparities)} scales, loss needs {cfg.scales}")
    height, width = target.shape[-2:]

    total = 0.0
    reproj_sum = 0.0
    smooth_sum = 0.0
    for scale in cfg.scales:
        disp = pyramid.disparities[scale]
        disp_full = disp
        if disp.shape[-2:] != (height, width):
            disp_full = F.interpolate(disp, (height, width), mode="bilinear", align_corners=False)
        depth = disparity_to_depth(disp_full, pyramid.min_depth, pyramid.max_depth)

        warped, masks = [], []
        for offset in sorted(sources):
            estimate, mask = synthesize_view(sources[offset], depth, K, poses[offset])
            warped.append(estimate)
            masks.append(mask)

        if cfg.per_pixel_min and len(warped) > 1:
            estimate, mask = _select_per_pixel(target, warped, masks)
            reproj = ms_reprojection_loss(target, estimate, mask, cfg)
        else:
            reproj = sum(ms_reprojection_loss(target, e, m, cfg) for e, m in zip(warped, masks)) / len(warped)

        smooth = target.new_zeros(())
        if cfg.smoothness_weight > 0:
            color = target if disp.shape[-2:] == (height, width) else F.interpolate(
                target, disp.shape[-2:], mode="area")
            smooth = cfg.smoothness_weight * edge_aware_smoothness(disp, color) / (2 ** scale)

        total = total + reproj + smooth
        reproj_sum += float(reproj.detach())
        smooth_sum += float(smooth.detach())

    n = len(cfg.scales)
    total = total / n
    breakdown = {
        "total": float(total.detach()),
        "ms_reproj": reproj_sum / n,
        "smoothness": smooth_sum / n,
    }
    return total, breakdown
