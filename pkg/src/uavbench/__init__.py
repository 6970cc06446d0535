"""Simulated multi-UAV detection benchmark toolkit."""

from .boxes import BBox2D, BBox3D, iou_2d, iou_3d
from .geometry import (
    Calibration,
    CameraModel,
    EulerPose,
    FrameConvention,
    RigidTransform,
    convert_frame,
    euler_to_matrix,
    intrinsics_from_fov,
    matrix_to_euler,
    project_point,
    project_points,
    sensor_to_world,
)
from .trajectory import UAV_SPECS, PoseTrack, TrajectoryConfig, UAVModel, UAVSpec, generate_waypoints, sample_poses
from .sensors import (
    LidarConfig,
    LidarScan,
    RadarConfig,
    RadarScan,
    WeatherProfile,
    apply_weather,
    lidar_scan,
    radar_scan,
    raycast,
    weather_profile,
)
from .annotation import (
    DifficultyThresholds,
    ObjectAnnotation,
    StatsReport,
    compute_stats,
    difficulty_score,
    project_bbox3d,
)
from .fusion import (
    FeatureGrid,
    FusionConfig,
    ScoreWeights,
    align_ir_features,
    build_correspondences,
    fuse_grids,
    late_fusion_score,
    lidar_guided_fusion,
    nms,
)
from .evaluation import ade_fde, average_precision, kalman_cv_predict, pose_errors, tracking_metrics
from .dataset_io import Clip, ClipFormatError, ClipManifest, ClipWriter, FrameRecord, read_clip, write_clip
from .generation import ScenarioConfig, generate_clips, run_generation

__version__ = "0.1.0"
