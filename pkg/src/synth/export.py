"""
Dataset export / reload.
Layout: frames/frame_NNNNNN.png, depths/depth_NNNNNN.pfm, poses.txt
(camera-to-world, 3x4 row-major per line), intrinsics.json and manifest.json.
"""
import hashlib
import json
import os
from typing import Dict

from src.config import Config
from src.geometry.camera import load_intrinsics, load_poses, save_intrinsics, save_poses
from src.synth.scenes import SceneConfig, SyntheticScene
from src.utils.errors import ConfigurationError, DatasetIOError
from src.utils.image_io import load_pfm, load_png, save_pfm, save_png
from src.utils.logger import setup_logger
from src.utils.validators import validate_file_exists

logger = setup_logger(__name__)


def _manifest_bytes(manifest: Dict) -> bytes:
    return (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode("utf-8")


def export_dataset(scene: SyntheticScene, directory: str) -> Dict:
    logger.info(f"Exporting {len(scene)} frames to {directory}")
    try:
        os.makedirs(os.path.join(directory, "frames"), exist_ok=True)
        os.makedirs(os.path.join(directory, "depths"), exist_ok=True)
    except OSError as e:
        raise DatasetIOError(f"Could not create dataset directory {directory}: {e}") from e

    frames, depths = [], []
    for i, (frame, depth) in enumerate(zip(scene.frames, scene.gt_depths)):
        frame_name = f"frames/frame_{i:06d}.png"
        depth_name = f"depths/depth_{i:06d}.pfm"
        save_png(frame, os.path.join(directory, frame_name))
        save_pfm(depth, os.path.join(directory, depth_name))
        frames.append(frame_name)
        depths.append(depth_name)

    save_poses(scene.gt_poses, os.path.join(directory, "poses.txt"))
    save_intrinsics(scene.intrinsics, os.path.join(directory, "intrinsics.json"))

    manifest = {
        "schema_version": Config.SCHEMA_VERSION,
        "kind": scene.config.kind,
        "n_frames": len(scene),
        "frames": frames,
        "depths": depths,
        "poses": "poses.txt",
        "intrinsics": "intrinsics.json",
        "config": scene.config.model_dump(mode="json"),
    }
    path = os.path.join(directory, Config.MANIFEST)
    try:
        with open(path, "wb") as f:
            f.write(_manifest_bytes(manifest))
    except OSError as e:
        raise DatasetIOError(f"Could not write manifest {path}: {e}") from e
    logger.info(f"Wrote manifest {path}")
    return manifest


def manifest_hash(directory: str) -> str:
    path = os.path.join(directory, Config.MANIFEST)
    validate_file_exists(path)
    with open(path, "rb") as f:
        return hashlib.sha256(f.read()).hexdigest()


def load_manifest(directory: str) -> Dict:
    path = os.path.join(directory, Config.MANIFEST)
    validate_file_exists(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            manifest = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise DatasetIOError(f"Could not read manifest {path}: {e}") from e
    if manifest.get("schema_version") != Config.SCHEMA_VERSION:
        raise ConfigurationError(
            f"Manifest {path} has schema_version {manifest.get('schema_version')}, expected {Config.SCHEMA_VERSION}"
        )
    return manifest


def load_dataset(directory: str) -> SyntheticScene:
    """Reloads an exported scene, checking every file the manifest references."""
    manifest = load_manifest(directory)
    for name in manifest["frames"] + manifest["depths"] + [manifest["poses"], manifest["intrinsics"]]:
        validate_file_exists(os.path.join(directory, name))

    frames = [load_png(os.path.join(directory, name)) for name in manifest["frames"]]
    depths = [load_pfm(os.path.join(directory, name)) for name in manifest["depths"]]
    poses = load_poses(os.path.join(directory, manifest["poses"]))
    intrinsics = load_intrinsics(os.path.join(directory, manifest["intrinsics"]))
    try:
        config = SceneConfig(**manifest["config"])
    except ValueError as e:
        raise ConfigurationError(f"Manifest config in {directory} is invalid: {e}") from e

    if not (len(frames) == len(depths) == len(poses) == manifest["n_frames"]):
        raise DatasetIOError(
            f"Dataset {directory} is inconsistent: {len(frames)} frames, {len(depths)} depths, {len(poses)} poses"
        )
    logger.info(f"Loaded {len(frames)} frames from {directory}")
    return SyntheticScene(frames=frames, gt_depths=depths, gt_poses=poses, intrinsics=intrinsics, config=config)
