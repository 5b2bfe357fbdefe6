from src.metrics.depth import METRIC_COLUMNS, DepthMetrics, depth_metrics
from src.metrics.photometric import psnr
from src.metrics.trajectory import Trajectory, accumulate_trajectory, ate, umeyama_alignment
