"""
Ray-cast LiDAR, weather and the FMCW radar
==========================================

"""

import time

import numpy as np

from uavbench.boxes import BBox3D
from uavbench.geometry import FrameConvention, sensor_to_world
from uavbench.sensors import GROUND_ID, LidarConfig, RadarConfig, apply_weather, radar_scan, raycast, weather_profile

# the default LiDAR: 256 channels, 120 x 40 degrees, 2.5 million points per second at 15 Hz
pose = sensor_to_world([0.0, 0.0, 1.7], FrameConvention.LIDAR_FLU, pitch=-20.0)
lidar = LidarConfig(pose=pose)
print("rays per frame:", lidar.num_rays)

# two UAV-sized boxes in front of the sensor
uavs = [BBox3D([25.0, 2.0, 10.0], (0.8, 0.45, 0.7), instance_id=1),
        BBox3D([40.0, -6.0, 14.0], (0.3, 0.2, 0.3), instance_id=2)]

t0 = time.perf_counter()
scan = raycast(lidar, uavs, ground_z=0.0)
dt = time.perf_counter() - t0
print(f"{len(scan)} returns in {dt * 1e3:.1f} ms ({lidar.num_rays / dt:.3g} rays/s)")
for target in (1, 2, GROUND_ID):
    print("  target", target, "points:", int(np.sum(scan.target == target)))

# fog drops 30% of returns and adds range noise along each ray
for name in ("clear_day", "rain_day", "fog_day"):
    w = weather_profile(name)
    kept = apply_weather(scan, w, seed=0)
    print(f"{name:<10s} kept {len(kept) / len(scan):.3f}")

# the radar reports range, angles and radial velocity for UAVs within 30 m
radar = RadarConfig()
# positions and velocities are in the radar frame: x forward, y right, z down
states = [([10.0, 0.0, 0.0], [5.0, 0.0, 0.0], 1),  # straight ahead, flying away at 5 m/s
          ([25.0, 25.0, 0.0], [0.0, 0.0, 0.0], 2),  # 35 m away, beyond range
          ([15.0, 5.0, -2.0], [0.0, -2.0, 0.0], 3)]
rs = radar_scan(radar, states, weather_profile("clear"), seed=0)
for rec in rs.to_records()[:: radar.returns_per_target]:
    print({k: (round(v, 3) if isinstance(v, float) else v) for k, v in rec.items()})
