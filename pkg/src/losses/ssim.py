"""
SSIM with a uniform window, and its multi-scale extension.

At scale j the contrast-structure term cs_j = (2 sigma_xy + C2) / (sigma_x^2 + sigma_y^2 + C2)
is the product c_j * s_j for C3 = C2 / 2; the luminance term l_M enters only
at the coarsest scale. Per-scale exponents beta_j = gamma_j = w_j and
alpha_M = w_M, with w the configured weights.
"""
import math
from functools import lru_cache
from typing import List, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.utils.errors import ConfigurationError, ShapeError
from src.utils.logger import setup_logger
from src.utils.validators import validate_same_shape

logger = setup_logger(__name__)

CANONICAL_MS_SSIM_WEIGHTS = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333]


class SsimConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    window: int = 11
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 1.0

    @field_validator("window")
    @classmethod
    def _check_window(cls, window: int) -> int:
        if window < 3 or window % 2 == 0:
            raise ValueError(f"window must be odd and >= 3, got {window}")
        return window

    @model_validator(mode="after")
    def _check_constants(self):
        if not (self.k1 > 0 and self.k2 > 0):
            raise ValueError("k1 and k2 must be positive")
        if not self.dynamic_range > 0:
            raise ValueError("dynamic_range must be positive")
        return self

    @property
    def c1(self) -> float:
        return (self.k1 * self.dynamic_range) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.dynamic_range) ** 2


class MsSsimConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    scales: int = 5
    weights: List[float] = Field(default_factory=lambda: list(CANONICAL_MS_SSIM_WEIGHTS))
    ssim: SsimConfig = Field(default_factory=SsimConfig)
    # Reduce `scales` for small images instead of raising.
    auto_reduce: bool = False

    @model_validator(mode="after")
    def _check(self):
        if self.scales < 1:
            raise ValueError(f"scales must be >= 1, got {self.scales}")
        if len(self.weights) < self.scales:
            raise ValueError(f"{self.scales} scales need {self.scales} weights, got {len(self.weights)}")
        if any(w < 0 for w in self.weights):
            raise ValueError("MS-SSIM weights must be non-negative")
        total = sum(self.weights[:self.scales])
        if abs(total - 1.0) > 1e-3:
            raise ValueError(f"weights of the first {self.scales} scales sum to {total:.4f}, expected 1")
        return self

    def exponents(self, scales: int) -> List[float]:
        """The first `scales` weights, renormalized to sum to 1."""
        w = self.weights[:scales]
        total = sum(w)
        return [x / total for x in w]


def _check_images(x: torch.Tensor, y: torch.Tensor):
    validate_same_shape("x", x, "y", y)
    if x.dim() != 4:
        raise ShapeError(f"images must be (B, C, H, W), got {tuple(x.shape)}")


def _ssim_terms(x: torch.Tensor, y: torch.Tensor, cfg: SsimConfig) -> Tuple[torch.Tensor, torch.Tensor]:
    """Per-pixel luminance and contrast-structure maps over valid window positions."""
    window = cfg.window
    if min(x.shape[-2:]) < window:
        raise ShapeError(f"image {tuple(x.shape[-2:])} is smaller than the SSIM window {window}")
    mu_x = F.avg_pool2d(x, window, stride=1)
    mu_y = F.avg_pool2d(y, window, stride=1)
    sigma_x = F.avg_pool2d(x * x, window, stride=1) - mu_x * mu_x
    sigma_y = F.avg_pool2d(y * y, window, stride=1) - mu_y * mu_y
    sigma_xy = F.avg_pool2d(x * y, window, stride=1) - mu_x * mu_y

    luminance = (2 * mu_x * mu_y + cfg.c1) / (mu_x * mu_x + mu_y * mu_y + cfg.c1)
    contrast_structure = (2 * sigma_xy + cfg.c2) / (sigma_x + sigma_y + cfg.c2)
    return luminance, contrast_structure


def ssim(x: torch.Tensor, y: torch.Tensor, cfg: SsimConfig = SsimConfig()) -> Tuple[torch.Tensor, torch.Tensor]:
    """Returns (mean SSIM, per-pixel SSIM map)."""
    _check_images(x, y)
    luminance, contrast_structure = _ssim_terms(x, y, cfg)
    ssim_map = luminance * contrast_structure
    return ssim_map.mean(), ssim_map


def max_feasible_scales(height: int, width: int, window: int) -> int:
    """Largest M with min(H, W) >= window * 2^(M-1) (0 if even one scale does not fit)."""
    size = min(height, width)
    if size < window:
        return 0
    return int(math.floor(math.log2(size / window))) + 1


@lru_cache(maxsize=None)
def _warn_scale_reduction(requested: int, feasible: int, size: Tuple[int, int]):
    # once per image size
    logger.warning(f"Reducing MS-SSIM scales from {requested} to {feasible} for image {size}")


def ms_ssim(x: torch.Tensor, y: torch.Tensor, cfg: MsSsimConfig = MsSsimConfig()) -> torch.Tensor:
    _check_images(x, y)
    scales = cfg.scales
    feasible = max_feasible_scales(x.shape[-2], x.shape[-1], cfg.ssim.window)
    if feasible < 1:
        raise ShapeError(f"image {tuple(x.shape[-2:])} is smaller than the SSIM window {cfg.ssim.window}")
    if scales > feasible:
        if not cfg.auto_reduce:
            raise ConfigurationError(
                f"image {tuple(x.shape[-2:])} supports at most {feasible} MS-SSIM scales, {scales} requested"
            )
        _warn_scale_reduction(scales, feasible, tuple(x.shape[-2:]))
        scales = feasible
    weights = cfg.exponents(scales)

    result = None
    for j in range(scales):
        luminance, contrast_structure = _ssim_terms(x, y, cfg.ssim)
        if j < scales - 1:
            value = contrast_structure.mean(dim=(-2, -1))
        else:
            value = (luminance * contrast_structure).mean(dim=(-2, -1))
        # negative correlation has no real fractional power
        term = value.clamp(min=1e-6) ** weights[j]
        result = term if result is None else result * term
        if j < scales - 1:
            x = F.avg_pool2d(x, kernel_size=2, stride=2)
            y = F.avg_pool2d(y, kernel_size=2, stride=2)
    return result.mean()


class _SsimMap3x3(nn.Module):
    """Reflection-padded 3x3 SSIM dissimilarity map, (1 - SSIM) / 2 per pixel."""

    def __init__(self, cfg: SsimConfig):
        super().__init__()
        self.pad = nn.ReflectionPad2d(1)
        self.pool = nn.AvgPool2d(3, 1)
        self.c1 = cfg.c1
        self.c2 = cfg.c2

    def forward(self, x, y):
        x = self.pad(x)
        y = self.pad(y)
        mu_x = self.pool(x)
        mu_y = self.pool(y)
        sigma_x = self.pool(x ** 2) - mu_x ** 2
        sigma_y = self.pool(y ** 2) - mu_y ** 2
        sigma_xy = self.pool(x * y) - mu_x * mu_y
        n = (2 * mu_x * mu_y + self.c1) * (2 * sigma_xy + self.c2)
        d = (mu_x ** 2 + mu_y ** 2 + self.c1) * (sigma_x + sigma_y + self.c2)
        return torch.clamp((1 - n / d) / 2, 0, 1)


def ssim_dissimilarity_map(x: torch.Tensor, y: torch.Tensor, cfg: SsimConfig = SsimConfig()) -> torch.Tensor:
    """Same-size (B, C, H, W) map of (1 - SSIM) / 2 with a 3x3 window."""
    _check_images(x, y)
    return _SsimMap3x3(cfg)(x, y)
