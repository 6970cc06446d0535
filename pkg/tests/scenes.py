"""Random scene builders shared by the unit and acceptance tests."""

import numpy as np

from uavbench.geometry import CameraModel, RigidTransform, euler_to_matrix


def random_rotation(rng):
    return euler_to_matrix(*rng.uniform([-180, -89, -180], [180, 89, 180]))


def random_transform(rng, scale=10.0):
    return RigidTransform(random_rotation(rng), rng.uniform(-scale, scale, 3))


def random_stereo_instance(rng, max_points=10_000, max_side=64):
    """Two small cameras looking at a shared point cloud, plus an IR feature grid.

    Both cameras share the grid resolution so projections index feature
    cells directly. Returns (points, cam_rgb, cam_ir, f_ir, r, K).
    """
    width, height = (int(x) for x in rng.integers(8, max_side + 1, 2))
    fx = float(rng.uniform(0.5, 1.5) * width)
    fy = fx * float(rng.uniform(0.9, 1.1))

    def camera(yaw, offset):
        cx = float(rng.uniform(0.3, 0.7) * width)
        cy = float(rng.uniform(0.3, 0.7) * height)
        # camera RDF axes: forward along world +x, right along -y, down along -z
        rdf = np.array([[0.0, -1.0, 0.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]])
        world_from_cam = RigidTransform(euler_to_matrix(0.0, 0.0, yaw) @ rdf.T, offset)
        return CameraModel(fx, fy, cx, cy, width, height, world_from_cam.inverse())

    baseline = rng.uniform(0.05, 1.0)
    cam_rgb = camera(float(rng.uniform(-3, 3)), [0.0, 0.0, 0.0])
    cam_ir = camera(float(rng.uniform(-3, 3)), [0.0, -baseline, float(rng.uniform(-0.1, 0.1))])
    n = int(np.exp(rng.uniform(np.log(10), np.log(max_points))))
    depth = rng.uniform(2.0, 40.0, n)
    lateral = rng.uniform(-0.7, 0.7, (n, 2)) * depth[:, None]
    points = np.column_stack([depth, lateral[:, 0], lateral[:, 1]])
    f_ir = rng.normal(size=(height, width, int(rng.integers(1, 6))))
    r = float(rng.choice([0, 0.5, 1, 2, 3, 4, 6]))
    K = int(rng.integers(1, 8))
    return points, cam_rgb, cam_ir, f_ir, r, K
