"""
Frames, poses and the pinhole camera
====================================

"""

import numpy as np

from uavbench.geometry import (FrameConvention, convert_frame, euler_to_matrix, intrinsics_from_fov,
                               matrix_to_euler, project_point, unproject)

# the simulator reports positions East-South-Up; everything else uses East-North-Up
p_esu = np.array([12.0, 3.0, 5.0])
p_enu = convert_frame(p_esu, FrameConvention.WORLD_ESU, FrameConvention.EGO_FLU)
print("ESU", p_esu, "-> ENU", p_enu)

# the same forward direction seen by the camera (RDF) and the radar (FRD)
forward = np.array([1.0, 0.0, 0.0])
print("forward in camera frame:", convert_frame(forward, FrameConvention.EGO_FLU, FrameConvention.CAMERA_RDF))
print("forward in radar frame: ", convert_frame(forward, FrameConvention.EGO_FLU, FrameConvention.RADAR_FRD))

# attitude is roll, pitch, yaw in degrees, applied as yaw then pitch then roll
r = euler_to_matrix(5.0, -10.0, 30.0)
print("round trip angles:", np.round(matrix_to_euler(r), 12))

# a 1280x720 camera with a 90 degree horizontal field of view has fx = 640
cam = intrinsics_from_fov(1280, 720, 90.0)
print("fx, fy, cx, cy:", cam.fx, cam.fy, cam.cx, cam.cy)

# a point one metre right and half a metre up, 2 m in front of the lens
uv, depth = project_point([1.0, -0.5, 2.0], cam)
print("pixel:", uv, "depth:", depth)
print("back to 3D:", unproject(uv[0], uv[1], depth, cam))

# mount the camera 1.5 m up, tilted 20 degrees towards the sky, and look at a UAV 30 m East
mounted = intrinsics_from_fov(1280, 720, 90.0).mounted([0.0, 0.0, 1.5], pitch=-20.0)
uv, depth = project_point([30.0, 0.0, 12.0], mounted)
print("UAV at 30 m East, 12 m up lands on pixel", np.round(uv, 1), "at depth", round(depth, 2))
