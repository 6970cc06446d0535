"""
LiDAR-guided RGB/IR feature fusion
==================================

"""

import numpy as np

from uavbench.fusion import (Detection, FusionConfig, build_correspondences, fuse_branch_detections,
                             lidar_guided_fusion, nms)
from uavbench.boxes import BBox2D
from uavbench.geometry import intrinsics_from_fov

rng = np.random.default_rng(0)

# RGB and IR cameras side by side, 30 cm apart, both looking East
intr = intrinsics_from_fov(1280, 720, 90.0)
rgb = intr.mounted([0.0, 0.0, 1.5])
ir = intr.mounted([0.0, -0.3, 1.5])

# a synthetic point cloud in front of the rig
points = np.column_stack([rng.uniform(5, 60, 20_000), rng.uniform(-40, 40, 20_000), rng.uniform(0, 30, 20_000)])
corr = build_correspondences(points, rgb, ir)
print(len(corr), "points visible in both cameras")
shift = corr.p_ir - corr.p_rgb
print("mean disparity (px):", shift.mean(axis=0).round(2))

# backbone features at 1/8 resolution; IR features are aligned to the RGB grid
f_rgb = rng.normal(size=(90, 160, 16)).astype(np.float32)
f_ir = rng.normal(size=(90, 160, 8)).astype(np.float32)
cfg = FusionConfig(r=4, K=5)
fused = lidar_guided_fusion(points, rgb, ir, f_rgb, f_ir, cfg)
aligned = fused.values[..., 16:]
print("fused grid:", fused.shape, " pixels with IR support:", int((np.abs(aligned).sum(axis=2) > 0).sum()))

# late fusion of the four branch scores, then NMS across overlapping detections
branches = [Detection(BBox2D(100, 100, 140, 130), s) for s in (0.8, 0.6, 0.4, 0.2)]
fused_det = fuse_branch_detections(branches)
print("fused score:", round(fused_det.score, 6))
dets = [(BBox2D(100, 100, 140, 130), 0.9), (BBox2D(102, 101, 141, 131), 0.7), (BBox2D(300, 80, 330, 100), 0.6)]
print("after NMS:", [s for _, s in nms(dets, 0.5)])
