from typing import Optional

import numpy as np


def psnr(estimate, reference, mask: Optional[np.ndarray] = None, peak: float = 1.0) -> float:
    """PSNR in dB over (optionally masked) pixels; inf for identical inputs."""
    estimate = np.asarray(estimate, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    diff = (estimate - reference) ** 2
    if mask is not None:
        diff = diff[np.asarray(mask, dtype=bool)]
    mse = float(np.mean(diff))
    if mse == 0:
        return float("inf")
    return float(10 * np.log10(peak ** 2 / mse))
