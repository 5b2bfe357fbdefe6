"""
Evaluation of a trained (or freshly initialized) depth/pose pair against the
ground truth of a synthetic scene: full-resolution depth metrics per frame,
averaged, and ATE of the chained pose estimates.
"""
import json
import time
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
import torch

from src.config import Config
from src.geometry.camera import Pose, axis_angle_to_matrix
from src.metrics.depth import DepthMetrics, depth_metrics
from src.metrics.trajectory import Trajectory, accumulate_trajectory, ate
from src.model.checkpoint import load_checkpoint, restore_models
from src.model.depth_net import DepthNet
from src.model.factory import build_models
from src.model.pose_net import PoseNet, pose_forward
from src.synth.scenes import SyntheticScene
from src.trainer.config import EvalConfig
from src.trainer.dataset import image_to_tensor
from src.trainer.experiment import ExperimentConfig, build_experiment_config
from src.utils.errors import ConfigurationError
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

EVAL_BATCH = 8


@dataclass
class EvaluationResult:
    metrics: DepthMetrics
    ate: float
    n_frames: int
    depths: List[np.ndarray]


def _check_resolution(depth_net: DepthNet, scene: SyntheticScene):
    cfg = depth_net.encoder.cfg
    if (scene.intrinsics.width, scene.intrinsics.height) != (cfg.image_width, cfg.image_height):
        raise ConfigurationError(
            f"dataset resolution {scene.intrinsics.width}x{scene.intrinsics.height} differs from model input "
            f"{cfg.image_width}x{cfg.image_height}"
        )


@torch.no_grad()
def predict_depths(depth_net: DepthNet, scene: SyntheticScene, indices: Sequence[int]) -> List[np.ndarray]:
    """Highest-resolution depth map for each frame in `indices`."""
    depth_net.eval()
    depths = []
    for start in range(0, len(indices), EVAL_BATCH):
        chunk = indices[start:start + EVAL_BATCH]
        images = torch.stack([image_to_tensor(scene.frames[i]) for i in chunk])
        depth = depth_net(images).depth(0)[:, 0]
        depths.extend(d.numpy().astype(np.float64) for d in depth)
    return depths


@torch.no_grad()
def predict_relative_poses(pose_net: PoseNet, scene: SyntheticScene, indices: Sequence[int]) -> List[Pose]:
    """Pose of each frame in its predecessor's camera, i.e. T_{i+1 -> i}, for consecutive `indices`."""
    pose_net.eval()
    poses = []
    for prev, nxt in zip(indices[:-1], indices[1:]):
        estimate = pose_forward(pose_net, image_to_tensor(scene.frames[nxt])[None],
                                image_to_tensor(scene.frames[prev])[None])
        matrix = axis_angle_to_matrix(estimate.axis_angle.double(), estimate.translation.double())[0]
        poses.append(Pose.from_matrix(matrix.numpy()))
    return poses


def gt_trajectory(scene: SyntheticScene, indices: Sequence[int]) -> Trajectory:
    origin = scene.gt_poses[indices[0]].inverse()
    return Trajectory.from_poses([origin.compose(scene.gt_poses[i]) for i in indices])


def depth_metrics_for(scene: SyntheticScene, indices: Sequence[int], depths: List[np.ndarray],
                      cfg: EvalConfig) -> DepthMetrics:
    per_frame = [
        depth_metrics(depth, scene.gt_depths[i], median_scale=cfg.median_scale, cap=cfg.cap,
                      mask=scene.valid_mask(i))
        for i, depth in zip(indices, depths)
    ]
    return DepthMetrics.mean(per_frame)


def evaluate_models(depth_net: DepthNet, pose_net: PoseNet, scene: SyntheticScene, cfg: EvalConfig,
                    indices: Optional[Sequence[int]] = None, oracle: bool = False) -> EvaluationResult:
    """
    With `oracle` the network predictions are replaced by ground-truth depth
    and relative poses, which pins the reference point of every metric.
    """
    torch.set_num_threads(Config.THREADS)
    indices = list(range(len(scene))) if indices is None else list(indices)
    if oracle:
        depths = [scene.gt_depths[i].astype(np.float64) for i in indices]
        relative = [scene.relative_pose(target=nxt, source=prev) for prev, nxt in zip(indices[:-1], indices[1:])]
    else:
        _check_resolution(depth_net, scene)
        depths = predict_depths(depth_net, scene, indices)
        relative = predict_relative_poses(pose_net, scene, indices)

    metrics = depth_metrics_for(scene, indices, depths, cfg)
    trajectory_error = ate(accumulate_trajectory(relative), gt_trajectory(scene, indices), align=cfg.align)
    return EvaluationResult(metrics=metrics, ate=trajectory_error, n_frames=len(indices), depths=depths)


def models_from_checkpoint(checkpoint_path: str):
    container = load_checkpoint(checkpoint_path)
    config: ExperimentConfig = build_experiment_config(json.loads(container["config"]))
    depth_net, pose_net = build_models(config.encoder, config.decoder, config.pose, config.adaptation,
                                       seed=config.train.seed)
    restore_models(container, depth_net, pose_net)
    return config, depth_net, pose_net


def evaluate(checkpoint_path: str, scene: SyntheticScene, eval_cfg: Optional[EvalConfig] = None,
             oracle: bool = False) -> EvaluationResult:
    """Loads a checkpoint (refusing hash mismatches) and evaluates it on every frame of `scene`."""
    config, depth_net, pose_net = models_from_checkpoint(checkpoint_path)
    cfg = eval_cfg or config.eval
    logger.info(f"Evaluating {checkpoint_path} on {len(scene)} frames (oracle={oracle})")
    result = evaluate_models(depth_net, pose_net, scene, cfg, oracle=oracle)
    logger.info(f"abs_rel={result.metrics.abs_rel:.4f} delta1={result.metrics.delta1:.4f} ate={result.ate:.6f}")
    return result


@torch.no_grad()
def measure_inference_ms(model: DepthNet, image: torch.Tensor, repeats: int = 10) -> float:
    """Mean wall-clock milliseconds of a depth forward pass (one warm-up run excluded)."""
    model.eval()
    model(image)
    start = time.perf_counter()
    for _ in range(repeats):
        model(image)
    return (time.perf_counter() - start) * 1000.0 / repeats
