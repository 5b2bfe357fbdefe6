from typing import Tuple

import torch

from src.lora.inject import AdaptationConfig, apply_adaptation
from src.model.decoder import DecoderConfig
from src.model.depth_net import DepthNet
from src.model.encoder import EncoderConfig
from src.model.pose_net import PoseNet, PoseNetConfig
from src.utils.logger import setup_logger

logger = setup_logger(__name__)


def build_models(encoder_cfg: EncoderConfig, decoder_cfg: DecoderConfig, pose_cfg: PoseNetConfig,
                 adaptation: AdaptationConfig, seed: int = 0) -> Tuple[DepthNet, PoseNet]:
    """
    Builds the depth and pose networks with deterministic initialization and
    configures encoder trainability for the adaptation mode. Decoder and pose
    network always train.
    """
    torch.manual_seed(seed)
    depth_net = DepthNet(encoder_cfg, decoder_cfg)
    pose_net = PoseNet(pose_cfg)
    apply_adaptation(depth_net.encoder, adaptation.mode, adaptation.injection_spec(encoder_cfg.blocks))
    logger.info(f"Built models (adaptation={adaptation.mode.value}, blocks={encoder_cfg.blocks}, "
                f"embed_dim={encoder_cfg.embed_dim})")
    return depth_net, pose_net
