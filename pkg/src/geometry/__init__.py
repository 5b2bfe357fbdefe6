from src.geometry.camera import (
    CameraIntrinsics,
    Pose,
    axis_angle_to_matrix,
    axis_angle_to_pose,
    load_intrinsics,
    load_poses,
    parse_pose_line,
    pose_to_line,
    save_intrinsics,
    save_poses,
)
from src.geometry.warp import (
    EPS_Z,
    PixelGrid,
    bilinear_sample,
    pixel_grid,
    reproject,
    synthesize_view,
)
