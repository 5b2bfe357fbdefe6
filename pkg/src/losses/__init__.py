from src.losses.ssim import (
    CANONICAL_MS_SSIM_WEIGHTS,
    MsSsimConfig,
    SsimConfig,
    max_feasible_scales,
    ms_ssim,
    ssim,
    ssim_dissimilarity_map,
)
from src.losses.reprojection import (
    ReprojectionLossConfig,
    edge_aware_smoothness,
    ms_reprojection_loss,
    total_ssl_loss,
)
