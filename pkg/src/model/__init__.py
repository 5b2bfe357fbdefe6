from src.model.decoder import DecoderConfig, DepthDecoder, tap_blocks
from src.model.depth_net import DepthNet, DepthPyramid, depth_forward, depth_to_disparity, disparity_to_depth
from src.model.encoder import EncoderConfig, TransformerEncoder
from src.model.pose_net import PoseEstimate, PoseNet, PoseNetConfig, pose_forward
