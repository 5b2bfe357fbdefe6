"""
Tests for depth metrics, trajectory alignment / ATE and PSNR.
"""
import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from src.geometry.camera import Pose, axis_angle_to_pose
from src.metrics import (
    METRIC_COLUMNS,
    DepthMetrics,
    Trajectory,
    accumulate_trajectory,
    ate,
    depth_metrics,
    psnr,
    umeyama_alignment,
)
from src.utils.errors import EvaluationError, ShapeError


def _brute_force(pred, gt):
    n = len(gt)
    abs_rel = sum(abs(p - g) / g for p, g in zip(pred, gt)) / n
    sq_rel = sum((p - g) ** 2 / g for p, g in zip(pred, gt)) / n
    rmse = math.sqrt(sum((p - g) ** 2 for p, g in zip(pred, gt)) / n)
    rmse_log = math.sqrt(sum((math.log(p) - math.log(g)) ** 2 for p, g in zip(pred, gt)) / n)
    deltas = [sum(max(p / g, g / p) < 1.25 ** k for p, g in zip(pred, gt)) / n for k in (1, 2, 3)]
    return [abs_rel, sq_rel, rmse, rmse_log, *deltas]


def _rotation(seed):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    return q * np.sign(np.linalg.det(q))


def test_depth_metrics_match_brute_force():
    rng = np.random.default_rng(0)
    gt = rng.uniform(0.5, 20.0, size=200)
    pred = gt * rng.uniform(0.6, 1.6, size=200)
    metrics = depth_metrics(pred, gt, median_scale=False)
    expected = _brute_force(pred.tolist(), gt.tolist())
    for name, value in zip(METRIC_COLUMNS, expected):
        assert getattr(metrics, name) == pytest.approx(value, abs=1e-12)


def test_perfect_prediction():
    gt = np.linspace(1.0, 10.0, 50).reshape(5, 10)
    metrics = depth_metrics(gt, gt)
    assert metrics.abs_rel == 0 and metrics.rmse == 0
    assert metrics.delta1 == metrics.delta2 == metrics.delta3 == 1.0


@pytest.mark.parametrize("scale", [0.25, 0.5, 2.0, 8.0])
def test_median_scaling_removes_global_scale(scale):
    rng = np.random.default_rng(1)
    gt = rng.uniform(1.0, 30.0, size=(16, 16))
    pred = gt * rng.uniform(0.8, 1.2, size=gt.shape)
    base = depth_metrics(pred, gt).as_row()
    scaled = depth_metrics(pred * scale, gt).as_row()
    for name in METRIC_COLUMNS:
        assert scaled[name] == pytest.approx(base[name], abs=1e-12)


def test_depths_are_capped():
    gt = np.array([1.0, 200.0])
    pred = np.array([1.0, 150.0])
    metrics = depth_metrics(pred, gt, median_scale=False, cap=150.0)
    assert metrics.abs_rel == 0.0


def test_mask_and_invalid_ground_truth_are_skipped():
    gt = np.array([2.0, 0.0, np.nan, 4.0])
    pred = np.array([2.0, 9.0, 9.0, 8.0])
    mask = np.array([True, True, True, False])
    assert depth_metrics(pred, gt, median_scale=False, mask=mask).abs_rel == 0.0
    with pytest.raises(EvaluationError):
        depth_metrics(pred, np.zeros(4))
    with pytest.raises(ShapeError):
        depth_metrics(np.ones(3), np.ones(4))


def test_metrics_average():
    a = DepthMetrics(0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7)
    b = DepthMetrics(0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
    assert DepthMetrics.mean([a, b]).as_row()["abs_rel"] == pytest.approx(0.2)
    with pytest.raises(EvaluationError):
        DepthMetrics.mean([])


def test_umeyama_recovers_similarity():
    rng = np.random.default_rng(2)
    data = rng.normal(size=(30, 3))
    R = _rotation(3)
    model = 2.5 * data @ R.T + np.array([1.0, -2.0, 0.5])
    s, R_est, t = umeyama_alignment(model, data, with_scale=True)
    assert s == pytest.approx(2.5, abs=1e-9)
    assert np.allclose(R_est, R, atol=1e-9)
    assert np.allclose(t, [1.0, -2.0, 0.5], atol=1e-9)


def test_ate_alignment_modes():
    rng = np.random.default_rng(4)
    gt = Trajectory(np.cumsum(rng.normal(size=(20, 3)), axis=0))
    moved = Trajectory(0.5 * gt.positions @ _rotation(5).T + np.array([3.0, 0.0, -1.0]))
    assert ate(moved, gt, align="similarity") < 1e-9
    assert ate(moved, gt, align="rigid") > 1e-3
    assert ate(moved, gt, align="none") > ate(moved, gt, align="rigid")
    rigid = Trajectory(gt.positions @ _rotation(6).T + 2.0)
    assert ate(rigid, gt, align="rigid") < 1e-9


def test_ate_without_alignment_is_rmse():
    gt = Trajectory(np.zeros((4, 3)))
    pred = Trajectory(np.array([[1.0, 0, 0], [0, 1.0, 0], [0, 0, 1.0], [1.0, 0, 0]]))
    assert ate(pred, gt, align="none") == pytest.approx(1.0)


def test_ate_rejects_bad_input():
    a = Trajectory(np.zeros((3, 3)))
    b = Trajectory(np.zeros((4, 3)))
    with pytest.raises(EvaluationError):
        ate(a, b)
    with pytest.raises(EvaluationError):
        ate(a, a, align="affine")
    with pytest.raises(EvaluationError):
        Trajectory(np.zeros((1, 3)))


def test_accumulate_trajectory_chains_steps():
    step = axis_angle_to_pose([0.0, 0.0, math.pi / 2], [1.0, 0.0, 0.0])
    trajectory = accumulate_trajectory([step] * 4)
    assert len(trajectory) == 5
    assert np.allclose(trajectory.positions[0], 0)
    assert np.allclose(trajectory.positions[1], [1, 0, 0])
    assert np.allclose(trajectory.positions[2], [1, 1, 0])
    assert np.allclose(trajectory.positions[4], [0, 0, 0], atol=1e-12)


def test_trajectory_from_poses():
    poses = [Pose.identity(), axis_angle_to_pose([0, 0, 0], [0, 2, 0])]
    trajectory = Trajectory.from_poses(poses)
    assert trajectory.orientations.shape == (2, 3, 3)
    assert np.allclose(trajectory.positions[1], [0, 2, 0])


def test_psnr():
    reference = np.full((4, 4, 3), 0.5)
    assert psnr(reference, reference) == float("inf")
    assert psnr(reference + 0.1, reference) == pytest.approx(20.0)
    estimate = reference.copy()
    estimate[0] = 0.0
    mask = np.ones((4, 4, 3), dtype=bool)
    mask[0] = False
    assert psnr(estimate, reference, mask=mask) == float("inf")
