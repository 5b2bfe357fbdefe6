"""
Depth error metrics: Abs Rel, Sq Rel, RMSE, RMSE log and threshold accuracy.
"""
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional

import numpy as np

from src.utils.errors import EvaluationError, ShapeError

METRIC_COLUMNS = ["abs_rel", "sq_rel", "rmse", "rmse_log", "delta1", "delta2", "delta3"]
MIN_DEPTH = 1e-3


@dataclass(frozen=True)
class DepthMetrics:
    abs_rel: float
    sq_rel: float
    rmse: float
    rmse_log: float
    delta1: float
    delta2: float
    delta3: float

    def as_row(self) -> Dict[str, float]:
        return asdict(self)

    @classmethod
    def mean(cls, items: List["DepthMetrics"]) -> "DepthMetrics":
        if not items:
            raise EvaluationError("cannot average an empty list of metrics")
        return cls(**{k: float(np.mean([getattr(m, k) for m in items])) for k in METRIC_COLUMNS})


def depth_metrics(pred, gt, median_scale: bool = True, cap: float = 150.0,
                  mask: Optional[np.ndarray] = None) -> DepthMetrics:
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ShapeError(f"pred {pred.shape} and gt {gt.shape} differ")

    valid = np.isfinite(gt) & (gt > 0)
    if mask is not None:
        valid &= np.asarray(mask, dtype=bool)
    if not valid.any():
        raise EvaluationError("no valid ground-truth pixels to evaluate")
    pred = pred[valid]
    gt = gt[valid]

    if median_scale:
        pred = pred * (np.median(gt) / np.median(pred))
    pred = np.clip(pred, MIN_DEPTH, cap)
    gt = np.clip(gt, MIN_DEPTH, cap)

    ratio = np.maximum(pred / gt, gt / pred)
    diff = pred - gt
    return DepthMetrics(
        abs_rel=float(np.mean(np.abs(diff) / gt)),
        sq_rel=float(np.mean(diff ** 2 / gt)),
        rmse=float(np.sqrt(np.mean(diff ** 2))),
        rmse_log=float(np.sqrt(np.mean((np.log(pred) - np.log(gt)) ** 2))),
        delta1=float(np.mean(ratio < 1.25)),
        delta2=float(np.mean(ratio < 1.25 ** 2)),
        delta3=float(np.mean(ratio < 1.25 ** 3)),
    )
