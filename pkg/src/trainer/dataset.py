"""
Frame triplets (t + offsets around center t) drawn from a synthetic scene,
and the train / validation split (last `val_fraction` of frames held out).
"""
from typing import Dict, List, Sequence, Tuple

import numpy as np
import torch
from torch.utils.data import Dataset

from src.synth.scenes import SyntheticScene
from src.utils.errors import ConfigurationError


def image_to_tensor(image: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(image, dtype=np.float32)).permute(2, 0, 1)


class TripletDataset(Dataset):
    def __init__(self, scene: SyntheticScene, centers: Sequence[int], offsets: Sequence[int]):
        self.scene = scene
        self.centers = list(centers)
        self.offsets = list(offsets)
        self.K = scene.intrinsics.matrix()

    def __len__(self) -> int:
        return len(self.centers)

    def __getitem__(self, index: int) -> Dict:
        t = self.centers[index]
        return {
            "index": t,
            "center": image_to_tensor(self.scene.frames[t]),
            "sources": {o: image_to_tensor(self.scene.frames[t + o]) for o in self.offsets},
            "K": self.K,
            "gt_depth": torch.from_numpy(np.ascontiguousarray(self.scene.gt_depths[t]))[None],
        }


def split_frames(n_frames: int, val_fraction: float) -> Tuple[List[int], List[int]]:
    n_val = max(1, int(round(n_frames * val_fraction)))
    if n_val >= n_frames:
        raise ConfigurationError(f"validation split leaves no training frames ({n_frames} frames)")
    return list(range(n_frames - n_val)), list(range(n_frames - n_val, n_frames))


def triplet_centers(frames: Sequence[int], offsets: Sequence[int]) -> List[int]:
    """Centers whose every neighbor lies inside `frames`."""
    allowed = set(frames)
    return [t for t in frames if all(t + o in allowed for o in offsets)]
