"""
Elliptical flight paths and platform limits
===========================================

"""

import numpy as np

from uavbench.trajectory import UAV_SPECS, TrajectoryConfig, UAVModel, generate_waypoints, sample_poses

# waypoints lie on a flattened ellipse, with a bounded random height jitter
cfg = TrajectoryConfig(a=15.0, b=7.0, h0=12.0, dh_bound=2.0, n_waypoints=20, seed=3)
wp = generate_waypoints(cfg, revolutions=2)
print("waypoints:", wp.shape, "height range", wp[:, 2].min().round(2), wp[:, 2].max().round(2))

# sample each platform along the same path at 15 Hz
print(f"{'platform':<18s} {'max speed':>9s} {'fastest':>8s} {'samples':>8s} {'max roll':>9s}")
for model in UAVModel:
    spec = UAV_SPECS[model]
    track = sample_poses(wp, spec, rate=15.0, seed=1)
    print(f"{model.value:<18s} {spec.max_speed:9.1f} {track.speeds().max():8.2f} "
          f"{len(track.positions):8d} {np.abs(track.roll).max():9.2f}")

# velocities are central differences of the sampled positions
track = sample_poses(wp, UAV_SPECS[UAVModel.MATRICE_300_RTK], seed=1)
fd = (track.positions[2:] - track.positions[:-2]) * track.rate / 2
print("velocity vs finite difference:", np.abs(fd - track.velocities[1:-1]).max())

# same seed, same track
again = sample_poses(wp, UAV_SPECS[UAVModel.MATRICE_300_RTK], seed=1)
print("deterministic:", np.array_equal(track.positions, again.positions))
