"""
Synthetic scenes with exact ground truth.

Both scene kinds texture a world surface with a procedural albedo evaluated
in closed form at each ray hit, so frames carry no resampling error:
  plane   - fronto-parallel plane Z = plane_depth (an exact homography per frame)
  terrain - Z = base_depth + h(X, Y), h a sum of low-frequency sinusoids,
            ray-cast with Newton iterations and Lambertian shading under a
            fixed world light.
Camera poses are camera-to-world; frame i+1 = frame i composed with motion[i].
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.config import Config
from src.geometry.camera import CameraIntrinsics, Pose, axis_angle_to_pose
from src.utils.errors import ConfigurationError
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

TEXTURE_COMPONENTS = 6
MAX_MISS_FRACTION = 0.01
NEWTON_ITERATIONS = 30
LIGHT_DIRECTION = np.array([0.3, -0.3, -1.0]) / np.linalg.norm([0.3, -0.3, -1.0])
AMBIENT = 0.35


class MotionStep(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    axis_angle: List[float] = Field(default_factory=lambda: [0.0, 0.0, 0.0])
    translation: List[float] = Field(default_factory=lambda: [0.0, 0.0, 0.0])

    @field_validator("axis_angle", "translation")
    @classmethod
    def _three(cls, v: List[float]) -> List[float]:
        if len(v) != 3:
            raise ValueError(f"expected 3 values, got {len(v)}")
        return v

    def pose(self) -> Pose:
        return axis_angle_to_pose(self.axis_angle, self.translation)


def _default_step() -> MotionStep:
    return MotionStep(axis_angle=[0.0, 0.004, 0.0], translation=[0.015, 0.005, 0.0])


class SceneConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["plane", "terrain"] = "terrain"
    width: int = 64
    height: int = 64
    intrinsics: Optional[CameraIntrinsics] = None
    n_frames: int = 200
    # one step per frame transition; omitted -> `default_step` repeated
    motion: Optional[List[MotionStep]] = None
    default_step: MotionStep = Field(default_factory=_default_step)
    texture_seed: int = 0
    brightness_jitter: float = 0.1
    plane_depth: float = 2.0
    terrain_base_depth: float = 3.0
    terrain_amplitude: float = 0.4
    terrain_components: int = 4
    far_depth: float = 100.0

    @model_validator(mode="after")
    def _check(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"resolution must be positive, got {self.width}x{self.height}")
        if self.n_frames < 3:
            raise ValueError(f"n_frames must be >= 3, got {self.n_frames}")
        if self.intrinsics is None:
            object.__setattr__(self, "intrinsics", CameraIntrinsics.centered(self.width, self.height))
        elif (self.intrinsics.width, self.intrinsics.height) != (self.width, self.height):
            raise ValueError("intrinsics width/height must match the scene resolution")
        if self.motion is None:
            object.__setattr__(self, "motion", [self.default_step] * (self.n_frames - 1))
        elif len(self.motion) != self.n_frames - 1:
            raise ValueError(f"motion has {len(self.motion)} steps, expected n_frames - 1 = {self.n_frames - 1}")
        if self.brightness_jitter < 0 or self.brightness_jitter >= 1:
            raise ValueError(f"brightness_jitter must be in [0, 1), got {self.brightness_jitter}")
        if self.plane_depth <= 0 or self.terrain_base_depth <= 0:
            raise ValueError("surface depths must be positive")
        if self.terrain_amplitude < 0:
            raise ValueError("terrain_amplitude must be >= 0")
        return self


@dataclass
class SyntheticScene:
    frames: List[np.ndarray]     # (H, W, 3) float32 in [0, 1]
    gt_depths: List[np.ndarray]  # (H, W) float32, camera z
    gt_poses: List[Pose]         # camera-to-world
    intrinsics: CameraIntrinsics
    config: SceneConfig

    def __len__(self) -> int:
        return len(self.frames)

    def valid_mask(self, index: int) -> np.ndarray:
        return self.gt_depths[index] < self.config.far_depth

    def relative_pose(self, target: int, source: int) -> Pose:
        """T_target_to_source: maps target-camera points into the source camera."""
        return self.gt_poses[source].inverse().compose(self.gt_poses[target])


class _Sinusoids:
    """Sum of plane waves a_k * sin(2 pi f_k . (X, Y) + phi_k), with gradient."""

    def __init__(self, freqs: np.ndarray, phases: np.ndarray, amps: np.ndarray):
        self.freqs = freqs    # (K, 2) cycles per unit
        self.phases = phases  # (K,)
        self.amps = amps      # (K, C)

    def _arg(self, X, Y):
        return 2 * math.pi * (X[..., None] * self.freqs[:, 0] + Y[..., None] * self.freqs[:, 1]) + self.phases

    def value(self, X, Y) -> np.ndarray:
        return np.sin(self._arg(X, Y)) @ self.amps

    def gradient(self, X, Y) -> Tuple[np.ndarray, np.ndarray]:
        c = np.cos(self._arg(X, Y))
        gx = (c * (2 * math.pi * self.freqs[:, 0])) @ self.amps
        gy = (c * (2 * math.pi * self.freqs[:, 1])) @ self.amps
        return gx, gy


def _random_waves(rng: np.random.Generator, count: int, freq_range: Tuple[float, float]):
    magnitude = rng.uniform(*freq_range, size=count)
    angle = rng.uniform(0, 2 * math.pi, size=count)
    freqs = np.stack([magnitude * np.cos(angle), magnitude * np.sin(angle)], axis=1)
    phases = rng.uniform(0, 2 * math.pi, size=count)
    return freqs, phases


def make_texture(seed: int) -> _Sinusoids:
    rng = np.random.default_rng([seed, 0])
    freqs, phases = _random_waves(rng, TEXTURE_COMPONENTS, (0.6, 2.5))
    amps = rng.uniform(0.02, 0.06, size=(TEXTURE_COMPONENTS, 3))
    return _Sinusoids(freqs, phases, amps)


def make_height_field(seed: int, components: int, amplitude: float) -> _Sinusoids:
    rng = np.random.default_rng([seed, 1])
    freqs, phases = _random_waves(rng, components, (0.08, 0.25))
    weights = rng.uniform(0.5, 1.0, size=components)
    amps = (amplitude * weights / weights.sum())[:, None]
    return _Sinusoids(freqs, phases, amps)


def _albedo(texture: _Sinusoids, X, Y) -> np.ndarray:
    return 0.5 + texture.value(X, Y)


def _camera_rays(intrinsics: CameraIntrinsics) -> np.ndarray:
    """(H, W, 3) camera-frame rays with unit z through every pixel center."""
    u, v = np.meshgrid(np.arange(intrinsics.width, dtype=np.float64),
                       np.arange(intrinsics.height, dtype=np.float64))
    return np.stack([(u - intrinsics.cx) / intrinsics.fx, (v - intrinsics.cy) / intrinsics.fy, np.ones_like(u)], axis=-1)


def _camera_poses(cfg: SceneConfig) -> List[Pose]:
    poses = [Pose.identity()]
    for step in cfg.motion:
        poses.append(poses[-1].compose(step.pose()))
    return poses


def _jitter_factors(cfg: SceneConfig) -> np.ndarray:
    if cfg.brightness_jitter == 0:
        return np.ones(cfg.n_frames)
    rng = np.random.default_rng([cfg.texture_seed, 2])
    return rng.uniform(1 - cfg.brightness_jitter, 1 + cfg.brightness_jitter, size=cfg.n_frames)


def _render_all(render_one: Callable[[Pose], Tuple[np.ndarray, np.ndarray]], poses: List[Pose]):
    if Config.THREADS > 1:
        # map preserves order, so output stays deterministic
        with ThreadPoolExecutor(max_workers=Config.THREADS) as pool:
            return list(pool.map(render_one, poses))
    return [render_one(p) for p in poses]


def _finish(cfg: SceneConfig, poses: List[Pose], rendered) -> SyntheticScene:
    factors = _jitter_factors(cfg)
    frames = [np.clip(img * f, 0.0, 1.0).astype(np.float32) for (img, _), f in zip(rendered, factors)]
    depths = [depth.astype(np.float32) for _, depth in rendered]
    return SyntheticScene(frames=frames, gt_depths=depths, gt_poses=poses, intrinsics=cfg.intrinsics, config=cfg)


def render_plane_scene(cfg: SceneConfig) -> SyntheticScene:
    if cfg.kind != "plane":
        raise ConfigurationError(f"render_plane_scene needs kind 'plane', got '{cfg.kind}'")
    logger.info(f"Rendering plane scene: {cfg.n_frames} frames at {cfg.width}x{cfg.height}")
    texture = make_texture(cfg.texture_seed)
    rays = _camera_rays(cfg.intrinsics)
    poses = _camera_poses(cfg)

    def render_one(pose: Pose):
        directions = rays @ pose.rotation.T
        s = (cfg.plane_depth - pose.translation[2]) / directions[..., 2]
        if not np.all(np.isfinite(s)) or np.any(s <= 0):
            raise ConfigurationError("motion moves the camera onto or behind the plane")
        hit = pose.translation + s[..., None] * directions
        # rays have unit camera z, so the ray parameter is the depth
        return _albedo(texture, hit[..., 0], hit[..., 1]), s

    return _finish(cfg, poses, _render_all(render_one, poses))


def render_terrain_scene(cfg: SceneConfig) -> SyntheticScene:
    if cfg.kind != "terrain":
        raise ConfigurationError(f"render_terrain_scene needs kind 'terrain', got '{cfg.kind}'")
    logger.info(f"Rendering terrain scene: {cfg.n_frames} frames at {cfg.width}x{cfg.height}")
    texture = make_texture(cfg.texture_seed)
    heights = make_height_field(cfg.texture_seed, cfg.terrain_components, cfg.terrain_amplitude)
    rays = _camera_rays(cfg.intrinsics)
    poses = _camera_poses(cfg)
    n_pixels = cfg.width * cfg.height

    def render_one(pose: Pose):
        d = rays @ pose.rotation.T
        o = pose.translation
        with np.errstate(divide="ignore", invalid="ignore"):
            s = (cfg.terrain_base_depth - o[2]) / d[..., 2]
            for _ in range(NEWTON_ITERATIONS):
                X = o[0] + s * d[..., 0]
                Y = o[1] + s * d[..., 1]
                f = o[2] + s * d[..., 2] - cfg.terrain_base_depth - heights.value(X, Y)[..., 0]
                gx, gy = heights.gradient(X, Y)
                df = d[..., 2] - (gx[..., 0] * d[..., 0] + gy[..., 0] * d[..., 1])
                s = s - f / df
            X = o[0] + s * d[..., 0]
            Y = o[1] + s * d[..., 1]
            residual = o[2] + s * d[..., 2] - cfg.terrain_base_depth - heights.value(X, Y)[..., 0]

        hit = np.isfinite(s) & (s > 0) & (np.abs(residual) < 1e-6)
        misses = n_pixels - int(hit.sum())
        if misses > MAX_MISS_FRACTION * n_pixels:
            raise ConfigurationError(f"{misses} of {n_pixels} rays miss the terrain (> 1%)")

        gx, gy = heights.gradient(np.where(hit, X, 0.0), np.where(hit, Y, 0.0))
        normal = np.stack([gx[..., 0], gy[..., 0], -np.ones_like(gx[..., 0])], axis=-1)
        normal /= np.linalg.norm(normal, axis=-1, keepdims=True)
        shade = AMBIENT + (1 - AMBIENT) * np.clip(normal @ LIGHT_DIRECTION, 0.0, None)
        color = _albedo(texture, np.where(hit, X, 0.0), np.where(hit, Y, 0.0)) * shade[..., None]

        color = np.where(hit[..., None], color, 0.0)
        depth = np.where(hit, s, cfg.far_depth)
        return color, depth

    return _finish(cfg, poses, _render_all(render_one, poses))


def render_scene(cfg: SceneConfig) -> SyntheticScene:
    if cfg.kind == "plane":
        return render_plane_scene(cfg)
    return render_terrain_scene(cfg)
