"""
Checkpoint container: a versioned torch.save dict holding the experiment
JSON, its SHA-256 hash, named tensor groups and optional training state.

Groups: encoder_frozen (base weights), encoder_trainable (LoRA factors, or
the whole encoder under full fine-tuning), decoder, pose.
"""
import hashlib
import os
from typing import Dict, Optional

import torch
import torch.nn as nn

from src.config import Config
from src.utils.errors import CheckpointError
from src.utils.logger import setup_logger

logger = setup_logger(__name__)


def config_hash(config_json: str) -> str:
    return hashlib.sha256(config_json.encode("utf-8")).hexdigest()


def split_encoder_state(encoder: nn.Module) -> Dict[str, Dict[str, torch.Tensor]]:
    trainable = {n for n, p in encoder.named_parameters() if p.requires_grad}
    frozen, adapted = {}, {}
    for name, tensor in encoder.state_dict().items():
        (adapted if name in trainable else frozen)[name] = tensor.detach().clone()
    return {"encoder_frozen": frozen, "encoder_trainable": adapted}


def save_checkpoint(path: str, config_json: str, depth_net: nn.Module, pose_net: nn.Module,
                    train_state: Optional[Dict] = None):
    container = {
        "format_version": Config.CHECKPOINT_FORMAT_VERSION,
        "config": config_json,
        "config_hash": config_hash(config_json),
        "tensors": {
            **split_encoder_state(depth_net.encoder),
            "decoder": {k: v.detach().clone() for k, v in depth_net.decoder.state_dict().items()},
            "pose": {k: v.detach().clone() for k, v in pose_net.state_dict().items()},
        },
        "train_state": train_state,
    }
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    tmp_path = path + ".tmp"
    torch.save(container, tmp_path)
    os.replace(tmp_path, path)
    logger.info(f"Saved checkpoint {path}")


def load_checkpoint(path: str, expected_config_json: Optional[str] = None) -> Dict:
    """Loads and validates a container; refuses configs whose hash does not match."""
    if not os.path.exists(path):
        raise CheckpointError(f"Checkpoint not found: {path}")
    try:
        container = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as e:
        raise CheckpointError(f"Checkpoint {path} is unreadable: {e}") from e

    if not isinstance(container, dict) or "config" not in container or "tensors" not in container:
        raise CheckpointError(f"Checkpoint {path} is missing required entries")
    if container.get("format_version") != Config.CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(
            f"Checkpoint {path} has format version {container.get('format_version')}, "
            f"expected {Config.CHECKPOINT_FORMAT_VERSION}"
        )
    if config_hash(container["config"]) != container.get("config_hash"):
        raise CheckpointError(f"Checkpoint {path} config does not match its stored hash")
    if expected_config_json is not None and config_hash(expected_config_json) != container["config_hash"]:
        raise CheckpointError(f"Checkpoint {path} was built from a different experiment config")
    return container


def restore_models(container: Dict, depth_net: nn.Module, pose_net: nn.Module):
    """Loads tensor groups into freshly built (and identically adapted) networks."""
    tensors = container["tensors"]
    try:
        depth_net.encoder.load_state_dict({**tensors["encoder_frozen"], **tensors["encoder_trainable"]})
        depth_net.decoder.load_state_dict(tensors["decoder"])
        pose_net.load_state_dict(tensors["pose"])
    except (KeyError, RuntimeError) as e:
        raise CheckpointError(f"Checkpoint tensors do not fit the configured model: {e}") from e
