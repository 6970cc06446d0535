import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uavbench.geometry import (
    BehindCameraError,
    Calibration,
    CameraModel,
    EulerPose,
    FrameConvention as FC,
    GeometryError,
    RigidTransform,
    UnsupportedFrameError,
    convert_frame,
    euler_to_matrix,
    intrinsics_from_fov,
    matrix_to_euler,
    orthonormalize,
    project_point,
    project_points,
    sensor_to_world,
    unproject,
    wrap_degrees,
)

FRAMES_3D = [c for c in FC if c.is_3d]


def random_rotation(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def random_transform(rng, scale=10.0):
    return RigidTransform(random_rotation(rng), rng.uniform(-scale, scale, 3))


@pytest.fixture
def cam():
    return intrinsics_from_fov(1280, 720, 90.0)


# --- intrinsics -------------------------------------------------------------

def test_intrinsics_default_rig_exact(cam):
    assert (cam.fx, cam.fy, cam.cx, cam.cy) == (640.0, 640.0, 640.0, 360.0)


def test_intrinsics_unit_case():
    c = intrinsics_from_fov(2, 2, 90.0)
    assert c.fx == pytest.approx(1.0, abs=1e-15)
    assert (c.cx, c.cy) == (1.0, 1.0)


def test_intrinsics_60_degrees():
    assert intrinsics_from_fov(1280, 720, 60.0).fx == pytest.approx(1108.513, abs=5e-4)


@pytest.mark.parametrize("hfov", [0.0, -5.0, 180.0, 200.0])
def test_intrinsics_reject_bad_fov(hfov):
    with pytest.raises(GeometryError):
        intrinsics_from_fov(1280, 720, hfov)


@pytest.mark.parametrize("kw", [dict(fx=0.0), dict(fy=-1.0), dict(cx=1280.0), dict(cy=-0.5)])
def test_camera_model_validates(kw):
    base = dict(fx=640.0, fy=640.0, cx=640.0, cy=360.0, width=1280, height=720)
    base.update(kw)
    with pytest.raises(GeometryError):
        CameraModel(**base)


# --- frame conventions ------------------------------------------------------

def test_exactly_six_conventions_one_left_handed():
    assert len(FC) == 6
    assert [c for c in FRAMES_3D if c.handedness == "left"] == [FC.WORLD_ESU]


@pytest.mark.parametrize("src,dst", list(itertools.permutations(FRAMES_3D, 2)))
def test_origin_fixed(src, dst):
    assert np.array_equal(convert_frame([0.0, 0.0, 0.0], src, dst), np.zeros(3))


def test_esu_to_canonical_flips_south():
    assert np.array_equal(convert_frame([1.0, 2.0, 3.0], FC.WORLD_ESU, FC.EGO_FLU), [1.0, -2.0, 3.0])


def test_forward_maps_to_camera_z():
    assert np.array_equal(convert_frame([1.0, 0.0, 0.0], FC.EGO_FLU, FC.CAMERA_RDF), [0.0, 0.0, 1.0])
    assert np.array_equal(convert_frame([0.0, 1.0, 0.0], FC.EGO_FLU, FC.CAMERA_RDF), [-1.0, 0.0, 0.0])
    assert np.array_equal(convert_frame([0.0, 0.0, 1.0], FC.EGO_FLU, FC.RADAR_FRD), [0.0, 0.0, -1.0])


@pytest.mark.parametrize("src,dst", list(itertools.permutations(FRAMES_3D, 2)))
def test_handedness_flip_count(src, dst):
    """Converting the basis between frames of opposite handedness has determinant -1."""
    m = np.stack([convert_frame(e, src, dst) for e in np.eye(3)], axis=1)
    expected = 1.0 if src.handedness == dst.handedness else -1.0
    assert np.linalg.det(m) == pytest.approx(expected)


@pytest.mark.parametrize("conv", [FC.IMAGE_RDF_2D])
def test_image_frame_rejected(conv):
    with pytest.raises(UnsupportedFrameError):
        convert_frame([1, 2, 3], conv, FC.EGO_FLU)
    with pytest.raises(UnsupportedFrameError):
        convert_frame([1, 2, 3], FC.EGO_FLU, conv)


# --- rotations --------------------------------------------------------------

def test_euler_matches_axis_products():
    r, p, y = 10.0, -20.0, 135.0
    rx = np.array([[1, 0, 0], [0, math.cos(math.radians(r)), -math.sin(math.radians(r))],
                   [0, math.sin(math.radians(r)), math.cos(math.radians(r))]])
    ry = np.array([[math.cos(math.radians(p)), 0, math.sin(math.radians(p))], [0, 1, 0],
                   [-math.sin(math.radians(p)), 0, math.cos(math.radians(p))]])
    rz = np.array([[math.cos(math.radians(y)), -math.sin(math.radians(y)), 0],
                   [math.sin(math.radians(y)), math.cos(math.radians(y)), 0], [0, 0, 1]])
    assert np.allclose(euler_to_matrix(r, p, y), rz @ ry @ rx, atol=1e-15)


@settings(max_examples=300, deadline=None)
@given(st.floats(-179.9, 180.0), st.floats(-88.9, 88.9), st.floats(-179.9, 180.0))
def test_euler_round_trip(roll, pitch, yaw):
    back = matrix_to_euler(euler_to_matrix(roll, pitch, yaw))
    assert np.allclose(back, (roll, pitch, yaw), atol=1e-7)


@given(st.floats(-1e4, 1e4))
def test_wrap_degrees_range(a):
    w = float(wrap_degrees(a))
    assert -180.0 < w <= 180.0
    assert math.isclose(math.cos(math.radians(w)), math.cos(math.radians(a)), abs_tol=1e-9)


def test_wrap_degrees_edges():
    assert wrap_degrees(-180.0) == 180.0
    assert wrap_degrees(180.0) == 180.0
    assert wrap_degrees(540.0) == 180.0
    assert wrap_degrees(12.345) == 12.345


def test_euler_pose_wraps_and_rejects_nonfinite():
    p = EulerPose([0, 0, 0], 190.0, 0.0, -190.0)
    assert p.roll == pytest.approx(-170.0) and p.yaw == pytest.approx(170.0)
    with pytest.raises(GeometryError):
        EulerPose([0, 0, 0], float("nan"), 0.0, 0.0)


def test_orthonormal_after_many_compositions():
    rng = np.random.default_rng(3)
    t = RigidTransform.identity()
    for _ in range(10_000):
        t = RigidTransform(orthonormalize((random_transform(rng) @ t).rotation), t.translation)
    r = t.rotation
    assert np.abs(r.T @ r - np.eye(3)).max() < 1e-7
    assert abs(np.linalg.det(r) - 1.0) < 1e-7


def test_compose_with_inverse_is_identity():
    rng = np.random.default_rng(0)
    for _ in range(200):
        t = random_transform(rng)
        m = (t @ t.inverse()).matrix
        assert np.allclose(m, np.eye(4), atol=1e-9)
        assert t.is_valid()


def test_transform_is_immutable():
    t = RigidTransform.identity()
    with pytest.raises(ValueError):
        t.rotation[0, 0] = 2.0


def test_apply_matches_matrix_product():
    rng = np.random.default_rng(1)
    t = random_transform(rng)
    p = rng.normal(size=(50, 3))
    homo = np.hstack([p, np.ones((50, 1))]) @ t.matrix.T
    assert np.allclose(t.apply(p), homo[:, :3], atol=1e-12)


# --- projection -------------------------------------------------------------

def test_principal_point(cam):
    uv, z = project_point([0.0, 0.0, 10.0], cam)
    assert np.array_equal(uv, [640.0, 360.0]) and z == 10.0


def test_projection_example(cam):
    uv, z = project_point([5.0, -2.0, 10.0], cam)
    assert np.array_equal(uv, [960.0, 232.0]) and z == 10.0


@pytest.mark.parametrize("z", [0.0, -3.0])
def test_behind_camera_raises(cam, z):
    with pytest.raises(BehindCameraError):
        project_point([1.0, 1.0, z], cam)


def test_unproject_examples(cam):
    assert np.array_equal(unproject(640, 360, 1.0, cam), [0.0, 0.0, 1.0])
    assert np.allclose(unproject(960, 232, 10.0, cam), [5.0, -2.0, 10.0], atol=1e-12)
    with pytest.raises(GeometryError):
        unproject(1, 1, 0.0, cam)


def test_mounted_camera_looks_forward():
    cam = intrinsics_from_fov(1280, 720, 90.0).mounted([0, 0, 1.5], yaw=90.0)
    # yaw 90 degrees: camera looks along +y (north)
    uv, z = project_point([0.0, 20.0, 1.5], cam)
    assert np.allclose(uv, [640, 360]) and z == pytest.approx(20.0)
    # a point to the left (west) lands on the left half of the image
    uv, _ = project_point([-3.0, 20.0, 1.5], cam)
    assert uv[0] < 640


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1279.999), st.floats(0, 719.999), st.floats(0.1, 500.0), st.integers(0, 2**31))
def test_project_unproject_property(u, v, d, seed):
    cam = intrinsics_from_fov(1280, 720, 90.0).with_extrinsic(random_transform(np.random.default_rng(seed)))
    uv, z = project_point(unproject(u, v, d, cam), cam)
    assert abs(uv[0] - u) < 1e-9 and abs(uv[1] - v) < 1e-9 and abs(z - d) < 1e-9


def test_sensor_to_world_axes():
    tf = sensor_to_world([1, 2, 3], FC.RADAR_FRD, yaw=0.0)
    # radar "down" axis is world -z
    assert np.allclose(tf.apply_rotation([0, 0, 1]), [0, 0, -1])
    assert np.allclose(tf.apply([0, 0, 0]), [1, 2, 3])


# --- calibration file -------------------------------------------------------

def test_calibration_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    cam = intrinsics_from_fov(1280, 720, 90.0).with_extrinsic(random_transform(rng))
    calib = Calibration(cameras={"rgb": cam}, mounts={"lidar": (FC.LIDAR_FLU, random_transform(rng))})
    path = tmp_path / "calib.json"
    calib.save(path)
    raw = json.loads(path.read_text())
    assert raw["euler_order"] == "ZYX-intrinsic"
    back = Calibration.load(path)
    assert np.array_equal(back.cameras["rgb"].extrinsic.matrix, cam.extrinsic.matrix)
    assert back.cameras["rgb"].intrinsics_dict() == cam.intrinsics_dict()
    conv, tf = back.mounts["lidar"]
    assert conv is FC.LIDAR_FLU and np.array_equal(tf.matrix, calib.mounts["lidar"][1].matrix)


def test_projection_vectorised_matches_scalar(cam):
    rng = np.random.default_rng(2)
    cam = cam.with_extrinsic(random_transform(rng))
    pts = rng.uniform(-30, 30, size=(100, 3))
    uv, z = project_points(pts, cam)
    for k in range(0, 100, 7):
        pc = cam.extrinsic.rotation @ pts[k] + cam.extrinsic.translation
        assert z[k] == pytest.approx(pc[2], abs=1e-12)
        if pc[2] > 0:
            assert np.allclose(uv[k], [640 * pc[0] / pc[2] + 640, 640 * pc[1] / pc[2] + 360], atol=1e-9)
