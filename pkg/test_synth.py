"""
Tests for procedural scene rendering and dataset export / reload.
"""
import json
import math
import sys
from pathlib import Path

import numpy as np
import pytest
import torch

sys.path.insert(0, str(Path(__file__).parent))

from src.config import Config
from src.geometry.camera import CameraIntrinsics
from src.geometry.warp import synthesize_view
from src.metrics import psnr
from src.synth import (
    MotionStep,
    SceneConfig,
    export_dataset,
    load_dataset,
    load_manifest,
    manifest_hash,
    render_plane_scene,
    render_scene,
    render_terrain_scene,
)
from src.synth.scenes import AMBIENT, LIGHT_DIRECTION
from src.utils.errors import ConfigurationError, DatasetIOError


def _small(kind="terrain", **overrides):
    return SceneConfig(**{"kind": kind, "n_frames": 5, **overrides})


def _warp_psnr(scene, target, source):
    image = torch.from_numpy(scene.frames[source].astype(np.float64)).permute(2, 0, 1)[None]
    depth = torch.from_numpy(scene.gt_depths[target].astype(np.float64))[None, None]
    T = scene.relative_pose(target=target, source=source).as_tensor(torch.float64)[None]
    warped, mask = synthesize_view(image, depth, scene.intrinsics.matrix(torch.float64), T)
    warped = warped[0].permute(1, 2, 0).numpy()
    valid = mask[0].numpy() & scene.valid_mask(target)
    return psnr(warped, scene.frames[target], mask=valid)


@pytest.mark.parametrize("kind", ["plane", "terrain"])
def test_render_shapes_and_ranges(kind):
    scene = render_scene(_small(kind))
    assert len(scene) == 5
    assert len(scene.gt_depths) == len(scene.gt_poses) == 5
    for frame, depth in zip(scene.frames, scene.gt_depths):
        assert frame.shape == (64, 64, 3) and frame.dtype == np.float32
        assert depth.shape == (64, 64) and depth.dtype == np.float32
        assert frame.min() >= 0 and frame.max() <= 1
        assert np.all(depth > 0)
    assert np.allclose(scene.gt_poses[0].matrix(), np.eye(4))


@pytest.mark.parametrize("kind", ["plane", "terrain"])
def test_render_is_deterministic(kind):
    a = render_scene(_small(kind, texture_seed=3))
    b = render_scene(_small(kind, texture_seed=3))
    for fa, fb, da, db in zip(a.frames, b.frames, a.gt_depths, b.gt_depths):
        assert np.array_equal(fa, fb) and np.array_equal(da, db)


def test_texture_seed_changes_frames():
    a = render_scene(_small(texture_seed=0))
    b = render_scene(_small(texture_seed=1))
    assert not np.array_equal(a.frames[0], b.frames[0])


def test_plane_first_frame_depth_is_constant():
    scene = render_plane_scene(_small("plane", plane_depth=2.5))
    assert np.allclose(scene.gt_depths[0], 2.5)


def test_default_intrinsics_are_centered():
    cfg = _small(width=64, height=64)
    assert (cfg.intrinsics.cx, cfg.intrinsics.cy) == (31.5, 31.5)
    assert cfg.intrinsics.width == 64 and cfg.intrinsics.height == 64


def test_brightness_jitter_scales_frames_only():
    steady = render_scene(_small(brightness_jitter=0.0))
    jittered = render_scene(_small(brightness_jitter=0.1))
    assert not np.array_equal(steady.frames[1], jittered.frames[1])
    for a, b in zip(steady.gt_depths, jittered.gt_depths):
        assert np.array_equal(a, b)


def test_zero_motion_gives_identical_frames():
    scene = render_plane_scene(_small("plane", default_step=MotionStep(), brightness_jitter=0.0))
    for frame, depth in zip(scene.frames[1:], scene.gt_depths):
        assert np.array_equal(frame, scene.frames[0])
        assert np.allclose(depth, 2.0)


def test_plane_sideways_motion_shifts_by_focal_times_baseline_over_depth():
    # 100 * 0.1 / 2 = 5 px
    intrinsics = CameraIntrinsics(fx=100.0, fy=100.0, cx=31.5, cy=31.5, width=64, height=64)
    cfg = _small("plane", n_frames=3, intrinsics=intrinsics, plane_depth=2.0, brightness_jitter=0.0,
                 motion=[MotionStep(translation=[0.1, 0.0, 0.0]), MotionStep()])
    scene = render_plane_scene(cfg)
    first, second = scene.frames[0], scene.frames[1]
    assert np.abs(second[:, :-5] - first[:, 5:]).max() <= 0.02
    assert np.abs(second - first).max() > 0.02


def test_brightness_jitter_stays_within_bounds():
    steady = render_scene(_small(n_frames=12, brightness_jitter=0.0))
    jittered = render_scene(_small(n_frames=12, brightness_jitter=0.2))
    ratios = np.array([b.mean() / a.mean() for a, b in zip(steady.frames, jittered.frames)])
    assert np.all(ratios >= 0.8 - 1e-6) and np.all(ratios <= 1.2 + 1e-6)
    assert np.abs(ratios - 1.0).max() > 1e-3


def test_flat_terrain_reduces_to_plane():
    common = {"n_frames": 4, "brightness_jitter": 0.0, "texture_seed": 5}
    plane = render_plane_scene(_small("plane", plane_depth=2.0, **common))
    flat = render_terrain_scene(_small("terrain", terrain_base_depth=2.0, terrain_amplitude=0.0, **common))
    shade = AMBIENT + (1 - AMBIENT) * -LIGHT_DIRECTION[2]
    for i in range(4):
        assert np.abs(flat.gt_depths[i] - plane.gt_depths[i]).max() < 1e-4
        assert np.abs(flat.frames[i] - plane.frames[i] * shade).max() < 1e-4


def test_terrain_rejects_scenes_whose_rays_miss():
    # second step turns the camera to look away from the surface
    cfg = _small("terrain", n_frames=3, motion=[MotionStep(), MotionStep(axis_angle=[math.pi, 0.0, 0.0])])
    with pytest.raises(ConfigurationError, match="miss the terrain"):
        render_terrain_scene(cfg)


def test_reexport_writes_identical_depth_files(tmp_path):
    cfg = _small(n_frames=3, texture_seed=4)
    export_dataset(render_scene(cfg), str(tmp_path / "a"))
    export_dataset(render_scene(cfg), str(tmp_path / "b"))
    for i in range(3):
        name = f"depth_{i:06d}.pfm"
        assert (tmp_path / "a" / "depths" / name).read_bytes() == (tmp_path / "b" / "depths" / name).read_bytes()


def test_scene_config_validation():
    with pytest.raises(ValueError):
        SceneConfig(n_frames=2)
    with pytest.raises(ValueError):
        SceneConfig(n_frames=4, motion=[MotionStep()] * 2)
    with pytest.raises(ValueError):
        SceneConfig(brightness_jitter=1.0)
    with pytest.raises(ValueError):
        MotionStep(translation=[0.0, 0.0])
    with pytest.raises(ValueError):
        SceneConfig(kind="cave")


def test_renderers_check_scene_kind():
    with pytest.raises(ConfigurationError):
        render_plane_scene(_small("terrain"))
    with pytest.raises(ConfigurationError):
        render_terrain_scene(_small("plane"))


def test_camera_behind_plane_is_rejected():
    cfg = _small("plane", n_frames=3, default_step=MotionStep(translation=[0.0, 0.0, 1.5]))
    with pytest.raises(ConfigurationError):
        render_scene(cfg)


def test_explicit_motion_is_followed():
    steps = [MotionStep(translation=[0.01 * (i + 1), 0.0, 0.0]) for i in range(4)]
    scene = render_scene(_small("plane", motion=steps))
    assert scene.gt_poses[-1].translation[0] == pytest.approx(0.1)


@pytest.mark.parametrize("kind", ["plane", "terrain"])
def test_ground_truth_warp_reconstructs_next_frame(kind):
    scene = render_scene(_small(kind, brightness_jitter=0.0))
    assert _warp_psnr(scene, target=1, source=2) > 35.0


def test_export_and_reload(tmp_path):
    scene = render_scene(_small(brightness_jitter=0.0))
    manifest = export_dataset(scene, str(tmp_path))
    assert manifest["n_frames"] == 5
    assert (tmp_path / "frames" / "frame_000004.png").exists()
    assert (tmp_path / "depths" / "depth_000000.pfm").exists()

    loaded = load_dataset(str(tmp_path))
    assert len(loaded) == 5
    assert loaded.config == scene.config
    assert loaded.intrinsics == scene.intrinsics
    for a, b in zip(scene.frames, loaded.frames):
        assert np.abs(a - b).max() <= 0.5 / 255 + 1e-6
    for a, b in zip(scene.gt_depths, loaded.gt_depths):
        assert np.array_equal(a, b)
    for a, b in zip(scene.gt_poses, loaded.gt_poses):
        assert np.array_equal(a.matrix(), b.matrix())


def test_manifest_hash_is_reproducible(tmp_path):
    cfg = _small(n_frames=3)
    export_dataset(render_scene(cfg), str(tmp_path / "a"))
    export_dataset(render_scene(cfg), str(tmp_path / "b"))
    assert manifest_hash(str(tmp_path / "a")) == manifest_hash(str(tmp_path / "b"))
    export_dataset(render_scene(_small(n_frames=3, texture_seed=9)), str(tmp_path / "c"))
    assert manifest_hash(str(tmp_path / "a")) != manifest_hash(str(tmp_path / "c"))


def test_missing_frame_is_reported(tmp_path):
    export_dataset(render_scene(_small(n_frames=3)), str(tmp_path))
    (tmp_path / "frames" / "frame_000001.png").unlink()
    with pytest.raises(DatasetIOError, match="frame_000001.png"):
        load_dataset(str(tmp_path))


def test_missing_manifest_is_reported(tmp_path):
    with pytest.raises(DatasetIOError):
        load_manifest(str(tmp_path))


def test_manifest_schema_version_is_checked(tmp_path):
    export_dataset(render_scene(_small(n_frames=3)), str(tmp_path))
    path = tmp_path / Config.MANIFEST
    manifest = json.loads(path.read_text())
    manifest["schema_version"] = Config.SCHEMA_VERSION + 1
    path.write_text(json.dumps(manifest))
    with pytest.raises(ConfigurationError, match="schema_version"):
        load_dataset(str(tmp_path))
