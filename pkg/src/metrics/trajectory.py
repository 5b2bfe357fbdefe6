"""
Trajectory accumulation and Absolute Trajectory Error with optional
least-squares (Umeyama) alignment.
"""
from dataclasses import dataclass
from typing import List, Literal, Optional, Tuple

import numpy as np

from src.geometry.camera import Pose
from src.utils.errors import EvaluationError

Alignment = Literal["none", "rigid", "similarity"]


@dataclass
class Trajectory:
    positions: np.ndarray                       # (N, 3)
    orientations: Optional[np.ndarray] = None   # (N, 3, 3)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        if len(self.positions) < 2:
            raise EvaluationError(f"a trajectory needs at least 2 positions, got {len(self.positions)}")

    def __len__(self) -> int:
        return len(self.positions)

    @classmethod
    def from_poses(cls, poses: List[Pose]) -> "Trajectory":
        return cls(np.stack([p.translation for p in poses]), np.stack([p.rotation for p in poses]))


def accumulate_trajectory(relative_poses: List[Pose]) -> Trajectory:
    """Chains relative poses starting at the identity; n poses give n + 1 positions."""
    current = Pose.identity()
    poses = [current]
    for rel in relative_poses:
        current = current.compose(rel)
        poses.append(current)
    return Trajectory.from_poses(poses)


def umeyama_alignment(model: np.ndarray, data: np.ndarray, with_scale: bool) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    Least-squares s, R, t with model ≈ s * R @ data + t.
    model, data: (N, 3)
    """
    mu_m = model.mean(axis=0)
    mu_d = data.mean(axis=0)
    m0 = model - mu_m
    d0 = data - mu_d
    n = len(model)

    C = m0.T @ d0 / n
    sigma2 = (d0 ** 2).sum() / n
    U, D, Vt = np.linalg.svd(C)
    S = np.eye(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        S[2, 2] = -1
    R = U @ S @ Vt
    s = float(np.trace(np.diag(D) @ S) / sigma2) if with_scale and sigma2 > 0 else 1.0
    t = mu_m - s * R @ mu_d
    return s, R, t


def ate(pred: Trajectory, gt: Trajectory, align: Alignment = "similarity") -> float:
    """RMSE of position differences after aligning `pred` onto `gt`."""
    if len(pred) != len(gt):
        raise EvaluationError(f"trajectory lengths differ: {len(pred)} vs {len(gt)}")
    positions = pred.positions
    if align != "none":
        if align not in ("rigid", "similarity"):
            raise EvaluationError(f"unknown alignment '{align}'")
        s, R, t = umeyama_alignment(gt.positions, positions, with_scale=(align == "similarity"))
        positions = s * positions @ R.T + t
    errors = positions - gt.positions
    return float(np.sqrt(np.mean(np.sum(errors ** 2, axis=1))))
