"""
Analytic vs central finite-difference gradients for every differentiable
operation of the training loss, in float64.

Each component builds a scalar function of one input tensor. Probes perturb
single coordinates when the input has at least as many entries as probes,
otherwise random unit directions.
"""
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

import numpy as np
import torch
from torch.func import functional_call

from src.config import Config
from src.geometry.camera import CameraIntrinsics, axis_angle_to_matrix
from src.geometry.warp import bilinear_sample, synthesize_view
from src.lora.layers import LoraLinear
from src.losses.reprojection import edge_aware_smoothness
from src.losses.ssim import MsSsimConfig, SsimConfig, ms_ssim, ssim
from src.utils.errors import ConfigurationError
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

DEFAULT_PROBES = 20
DEFAULT_EPS = 1e-5
TOLERANCE = 1e-3


@dataclass
class GradCase:
    func: Callable[[torch.Tensor], torch.Tensor]
    x0: torch.Tensor
    eps: float = DEFAULT_EPS


@dataclass
class GradcheckReport:
    component: str
    seed: int
    probes: int
    max_rel_error: float
    tolerance: float = TOLERANCE

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance

    def as_row(self) -> Dict:
        return {"component": self.component, "seed": self.seed, "probes": self.probes,
                "max_rel_error": self.max_rel_error, "tolerance": self.tolerance, "passed": self.passed}


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-6)


def _smooth_image(height: int, width: int, channels: int, gen: torch.Generator) -> torch.Tensor:
    """Low-frequency texture, so bilinear slopes vary little across pixel boundaries."""
    ys, xs = torch.meshgrid(torch.arange(height, dtype=torch.float64),
                            torch.arange(width, dtype=torch.float64), indexing="ij")
    layers = []
    for _ in range(channels):
        fx, fy = 0.4 * torch.rand(2, generator=gen, dtype=torch.float64)
        phase = 6.28 * torch.rand((), generator=gen, dtype=torch.float64)
        layers.append(0.5 + 0.3 * torch.sin(fx * xs + fy * ys + phase))
    return torch.stack(layers)[None]


def _ms_ssim_case(gen: torch.Generator) -> GradCase:
    cfg = MsSsimConfig()
    size = cfg.ssim.window * 2 ** (cfg.scales - 1)
    x = torch.rand(1, 1, size, size, generator=gen, dtype=torch.float64)
    y0 = (x + 0.1 * torch.rand(x.shape, generator=gen, dtype=torch.float64)).clamp(0, 1)
    return GradCase(lambda y: ms_ssim(x, y, cfg), y0)


def _ssim_case(gen: torch.Generator) -> GradCase:
    x = torch.rand(1, 3, 16, 16, generator=gen, dtype=torch.float64)
    y0 = (x + 0.1 * torch.rand(x.shape, generator=gen, dtype=torch.float64)).clamp(0, 1)
    return GradCase(lambda y: ssim(x, y, SsimConfig())[0], y0)


def _sampler_case(gen: torch.Generator) -> GradCase:
    source = _smooth_image(12, 12, 3, gen)
    coords0 = 0.5 + 10.0 * torch.rand(1, 12, 12, 2, generator=gen, dtype=torch.float64)
    weights = torch.rand(1, 3, 12, 12, generator=gen, dtype=torch.float64)
    return GradCase(lambda coords: (bilinear_sample(source, coords) * weights).sum(), coords0)


def _warp_inputs(gen: torch.Generator):
    size = 16
    K = CameraIntrinsics.centered(size, size).matrix(torch.float64)
    source = _smooth_image(size, size, 3, gen)
    depth = 2.0 + torch.rand(1, 1, size, size, generator=gen, dtype=torch.float64)
    aa = 0.02 + 0.03 * torch.rand(1, 3, generator=gen, dtype=torch.float64)
    t = 0.02 * torch.rand(1, 3, generator=gen, dtype=torch.float64)
    weights = torch.rand(1, 3, size, size, generator=gen, dtype=torch.float64)
    return K, source, depth, aa, t, weights


def _warp_depth_case(gen: torch.Generator) -> GradCase:
    K, source, depth0, aa, t, weights = _warp_inputs(gen)
    T = axis_angle_to_matrix(aa, t)
    return GradCase(lambda depth: (synthesize_view(source, depth, K, T)[0] * weights).sum(), depth0)


def _warp_pose_case(gen: torch.Generator, at_identity: bool = False) -> GradCase:
    K, source, depth, aa, t, weights = _warp_inputs(gen)
    if at_identity:
        # zero rotation; the translation keeps sample points off integer pixels
        aa = torch.zeros_like(aa)
        t = 0.005 + t

    def func(pose: torch.Tensor) -> torch.Tensor:
        T = axis_angle_to_matrix(pose[None, :3], pose[None, 3:])
        return (synthesize_view(source, depth, K, T)[0] * weights).sum()

    # direction probes move every sample point at once
    return GradCase(func, torch.cat([aa[0], t[0]]), eps=1e-7)


def _lora_case(gen: torch.Generator) -> GradCase:
    d, k, r = 6, 5, 2
    base = torch.nn.Linear(k, d).double()
    with torch.no_grad():
        base.weight.copy_(torch.randn(d, k, generator=gen, dtype=torch.float64))
        base.bias.copy_(torch.randn(d, generator=gen, dtype=torch.float64))
    layer = LoraLinear(base, rank=r)
    x = torch.randn(3, k, generator=gen, dtype=torch.float64)
    A0 = torch.randn(r, k, generator=gen, dtype=torch.float64)
    B0 = torch.randn(d, r, generator=gen, dtype=torch.float64)

    def func(theta: torch.Tensor) -> torch.Tensor:
        A = theta[:r * k].reshape(r, k)
        B = theta[r * k:r * k + d * r].reshape(d, r)
        inputs = theta[r * k + d * r:].reshape(3, k)
        out = functional_call(layer, {"lora_A": A, "lora_B": B}, (inputs,))
        return torch.sin(out).sum()

    return GradCase(func, torch.cat([A0.reshape(-1), B0.reshape(-1), x.reshape(-1)]))


def _smoothness_case(gen: torch.Generator) -> GradCase:
    image = torch.rand(1, 3, 12, 12, generator=gen, dtype=torch.float64)
    disp0 = 0.1 + torch.rand(1, 1, 12, 12, generator=gen, dtype=torch.float64)
    return GradCase(lambda disp: edge_aware_smoothness(disp, image), disp0)


COMPONENTS: Dict[str, Callable[[torch.Generator], GradCase]] = {
    "ms_ssim": _ms_ssim_case,
    "ssim": _ssim_case,
    "sampler": _sampler_case,
    "warp_depth": _warp_depth_case,
    "warp_pose": _warp_pose_case,
    "warp_pose_identity": lambda gen: _warp_pose_case(gen, at_identity=True),
    "lora": _lora_case,
    "smoothness": _smoothness_case,
}


def probe_errors(func: Callable[[torch.Tensor], torch.Tensor], x0: torch.Tensor, probes: int = DEFAULT_PROBES,
                 eps: float = DEFAULT_EPS, seed: int = 0) -> List[float]:
    x = x0.detach().clone().requires_grad_(True)
    (grad,) = torch.autograd.grad(func(x), x)
    grad = grad.reshape(-1)
    base = x0.detach().reshape(-1)
    rng = np.random.default_rng(seed)

    if base.numel() >= probes:
        indices = rng.choice(base.numel(), size=probes, replace=False)
        directions = []
        for j in indices:
            v = torch.zeros_like(base)
            v[int(j)] = 1.0
            directions.append(v)
    else:
        directions = []
        for _ in range(probes):
            v = torch.from_numpy(rng.standard_normal(base.numel()))
            directions.append(v / v.norm())

    errors = []
    with torch.no_grad():
        for v in directions:
            f_plus = float(func((base + eps * v).view_as(x0)))
            f_minus = float(func((base - eps * v).view_as(x0)))
            numeric = (f_plus - f_minus) / (2 * eps)
            analytic = float(grad @ v)
            errors.append(relative_error(analytic, numeric))
    return errors


def run_gradcheck(component: str, seed: int = 0, probes: int = DEFAULT_PROBES,
                  eps: Optional[float] = None) -> GradcheckReport:
    if component not in COMPONENTS:
        raise ConfigurationError(f"Unknown gradcheck component '{component}'; valid: {', '.join(COMPONENTS)}")
    torch.set_num_threads(Config.THREADS)
    gen = torch.Generator().manual_seed(seed)
    case = COMPONENTS[component](gen)
    errors = probe_errors(case.func, case.x0, probes=probes, eps=case.eps if eps is None else eps, seed=seed)
    report = GradcheckReport(component=component, seed=seed, probes=len(errors), max_rel_error=max(errors))
    log = logger.info if report.passed else logger.error
    log(f"gradcheck {component}: max relative error {report.max_rel_error:.3e} over {report.probes} probes")
    return report
