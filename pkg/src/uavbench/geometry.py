"""Coordinate frames, rigid transforms and the pinhole camera model.

Frame conventions
-----------------
World-ESU        simulator world, East-South-Up (left-handed)
Ego-FLU          UAV body, Forward-Left-Up
SensorCam-RDF    camera optical frame, Right-Down-Forward (OpenCV)
SensorLidar-FLU  LiDAR, Forward-Left-Up
SensorRadar-FRD  radar, Forward-Right-Down
Image-RDF-2D     image plane, origin at the top-left corner

All 3D math routes through one canonical right-handed world frame (ENU),
obtained from World-ESU by negating the south axis. Co-located body frames
are related to it by fixed axis relabelling with "forward" along East.

Pixel convention: cell (row i, col j) covers [j, j+1) x [i, i+1) in (u, v),
so its center sits at (j + 0.5, i + 0.5) and cx = W/2 is the image center.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

EULER_ORDER = "ZYX-intrinsic"


class GeometryError(ValueError):
    pass


class UnsupportedFrameError(GeometryError):
    pass


class BehindCameraError(GeometryError):
    pass


class FrameConvention(enum.Enum):
    WORLD_ESU = "World-ESU"
    EGO_FLU = "Ego-FLU"
    CAMERA_RDF = "SensorCam-RDF"
    LIDAR_FLU = "SensorLidar-FLU"
    RADAR_FRD = "SensorRadar-FRD"
    IMAGE_RDF_2D = "Image-RDF-2D"

    @property
    def handedness(self) -> str:
        return "left" if self is FrameConvention.WORLD_ESU else "right"

    @property
    def is_3d(self) -> bool:
        return self is not FrameConvention.IMAGE_RDF_2D


# Columns are the convention's axes expressed in the canonical ENU frame.
_TO_CANONICAL = {
    FrameConvention.WORLD_ESU: np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]]),
    FrameConvention.EGO_FLU: np.eye(3),
    FrameConvention.LIDAR_FLU: np.eye(3),
    FrameConvention.CAMERA_RDF: np.array([[0.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]]),
    FrameConvention.RADAR_FRD: np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]]),
}


def axis_map(convention: FrameConvention) -> np.ndarray:
    """Signed permutation taking coordinates in `convention` to canonical ENU."""
    if not convention.is_3d:
        raise UnsupportedFrameError(f"{convention.value} is not a 3D frame")
    return _TO_CANONICAL[convention].copy()


def convert_frame(point, src: FrameConvention, dst: FrameConvention) -> np.ndarray:
    """Re-express a point (or an (N, 3) array) from one axis convention in another."""
    for conv in (src, dst):
        if not conv.is_3d:
            raise UnsupportedFrameError(f"{conv.value} is not a 3D frame")
    m = _TO_CANONICAL[dst].T @ _TO_CANONICAL[src]
    p = np.asarray(point, dtype=float)
    return p @ m.T


def esu_to_canonical(point) -> np.ndarray:
    return convert_frame(point, FrameConvention.WORLD_ESU, FrameConvention.EGO_FLU)


# ---------------------------------------------------------------------------
# rotations


def wrap_degrees(angle):
    """Wrap angles into (-180, 180]; in-range values pass through untouched."""
    a = np.asarray(angle, dtype=float)
    wrapped = 180.0 - np.mod(180.0 - a, 360.0)
    return np.where((a > -180.0) & (a <= 180.0), a, wrapped)


def rot_x(angle_rad: float) -> np.ndarray:
    c, s = math.cos(angle_rad), math.sin(angle_rad)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle_rad: float) -> np.ndarray:
    c, s = math.cos(angle_rad), math.sin(angle_rad)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle_rad: float) -> np.ndarray:
    c, s = math.cos(angle_rad), math.sin(angle_rad)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def euler_to_matrix(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Intrinsic yaw-pitch-roll (Z-Y-X) in degrees about FLU body axes."""
    return rot_z(math.radians(yaw)) @ rot_y(math.radians(pitch)) @ rot_x(math.radians(roll))


def matrix_to_euler(rotation) -> tuple[float, float, float]:
    """Inverse of :func:`euler_to_matrix`; returns (roll, pitch, yaw) in degrees."""
    r = np.asarray(rotation, dtype=float)
    pitch = math.asin(max(-1.0, min(1.0, -r[2, 0])))
    yaw = math.atan2(r[1, 0], r[0, 0])
    roll = math.atan2(r[2, 1], r[2, 2])
    return tuple(float(wrap_degrees(math.degrees(a))) for a in (roll, pitch, yaw))


def orthonormalize(rotation) -> np.ndarray:
    """Project a near-rotation onto SO(3) via SVD."""
    u, _, vt = np.linalg.svd(np.asarray(rotation, dtype=float))
    r = u @ vt
    if np.linalg.det(r) < 0:
        u[:, -1] *= -1
        r = u @ vt
    return r


def geodesic_angle(r_a, r_b) -> float:
    """Rotation angle of R_a^T R_b in degrees."""
    rel = np.asarray(r_a, dtype=float).T @ np.asarray(r_b, dtype=float)
    c = (np.trace(rel) - 1.0) / 2.0
    return math.degrees(math.acos(max(-1.0, min(1.0, c))))


@dataclass(frozen=True)
class EulerPose:
    position: np.ndarray
    roll: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))
        for name in ("roll", "pitch", "yaw"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise GeometryError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, float(wrap_degrees(value)))

    @property
    def rotation(self) -> np.ndarray:
        return euler_to_matrix(self.roll, self.pitch, self.yaw)

    @classmethod
    def from_matrix(cls, position, rotation) -> "EulerPose":
        roll, pitch, yaw = matrix_to_euler(rotation)
        return cls(position, roll, pitch, yaw)


@dataclass(frozen=True)
class RigidTransform:
    """x_dst = R @ x_src + t."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls()

    @classmethod
    def from_matrix(cls, matrix) -> "RigidTransform":
        m = np.asarray(matrix, dtype=float).reshape(4, 4)
        return cls(m[:3, :3], m[:3, 3])

    @property
    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def apply(self, points) -> np.ndarray:
        return self.apply_rotation(points) + self.translation

    def apply_rotation(self, vectors) -> np.ndarray:
        # elementwise rather than matmul: results do not depend on batch shape
        p = np.asarray(vectors, dtype=float)
        r = self.rotation
        x, y, z = p[..., 0], p[..., 1], p[..., 2]
        return np.stack([r[i, 0] * x + r[i, 1] * y + r[i, 2] * z for i in range(3)], axis=-1)

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self after other."""
        return RigidTransform(self.rotation @ other.rotation,
                              self.rotation @ other.translation + self.translation)

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return self.compose(other)

    def is_valid(self, tol: float = 1e-9) -> bool:
        r = self.rotation
        return bool(np.allclose(r.T @ r, np.eye(3), atol=tol) and abs(np.linalg.det(r) - 1.0) < tol)


def sensor_to_world(position, convention: FrameConvention, roll=0.0, pitch=0.0, yaw=0.0) -> RigidTransform:
    """Mounting pose of a sensor whose body heading is given by FLU Euler angles.

    The returned transform maps sensor-frame coordinates (in `convention`)
    to canonical world coordinates.
    """
    body = euler_to_matrix(roll, pitch, yaw)
    return RigidTransform(body @ axis_map(convention), position)


# ---------------------------------------------------------------------------
# pinhole camera


@dataclass(frozen=True)
class CameraModel:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    extrinsic: RigidTransform = field(default_factory=RigidTransform.identity)  # world -> camera RDF

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise GeometryError("focal lengths must be positive")
        if self.width < 1 or self.height < 1:
            raise GeometryError("image size must be at least 1x1")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise GeometryError("principal point outside the image")

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    @property
    def center(self) -> np.ndarray:
        """Optical center in world coordinates."""
        return self.extrinsic.inverse().translation

    def with_extrinsic(self, extrinsic: RigidTransform) -> "CameraModel":
        return CameraModel(self.fx, self.fy, self.cx, self.cy, self.width, self.height, extrinsic)

    def mounted(self, position, roll=0.0, pitch=0.0, yaw=0.0) -> "CameraModel":
        pose = sensor_to_world(position, FrameConvention.CAMERA_RDF, roll, pitch, yaw)
        return self.with_extrinsic(pose.inverse())

    def in_image(self, uv) -> np.ndarray:
        uv = np.asarray(uv, dtype=float)
        return (uv[..., 0] >= 0) & (uv[..., 0] < self.width) & (uv[..., 1] >= 0) & (uv[..., 1] < self.height)

    def intrinsics_dict(self) -> dict:
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
                "width": self.width, "height": self.height}


def intrinsics_from_fov(width: int, height: int, hfov: float) -> CameraModel:
    """Square-pixel intrinsics with a centered principal point."""
    if width < 1 or height < 1:
        raise GeometryError("width and height must be >= 1")
    if not 0.0 < hfov < 180.0:
        raise GeometryError(f"horizontal FoV must lie in (0, 180) degrees, got {hfov}")
    # tan(h/2) = sin h / (1 + cos h); exact at the common 90 degree setting
    h = math.radians(hfov)
    f = width / 2.0 * (1.0 + math.cos(h)) / math.sin(h)
    return CameraModel(f, f, width / 2.0, height / 2.0, width, height)


def project_points(points, cam: CameraModel) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised projection. Returns (uv, depth); uv is meaningless where depth <= 0."""
    pc = cam.extrinsic.apply(np.atleast_2d(np.asarray(points, dtype=float)))
    z = pc[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = cam.fx * (pc[:, 0] / z) + cam.cx
        v = cam.fy * (pc[:, 1] / z) + cam.cy
    return np.stack([u, v], axis=1), z


def project_point(point, cam: CameraModel) -> tuple[np.ndarray, float]:
    uv, z = project_points(point, cam)
    if not z[0] > 0:
        raise BehindCameraError(f"point has non-positive camera depth {z[0]:.6g}")
    return uv[0], float(z[0])


def unproject(u: float, v: float, depth: float, cam: CameraModel) -> np.ndarray:
    """World point at `depth` along the ray through pixel (u, v)."""
    if not depth > 0:
        raise GeometryError(f"depth must be positive, got {depth}")
    x = (u - cam.cx) / cam.fx * depth
    y = (v - cam.cy) / cam.fy * depth
    return cam.extrinsic.inverse().apply(np.array([x, y, depth]))


# ---------------------------------------------------------------------------
# calibration file


@dataclass
class Calibration:
    """Per-sensor intrinsics and world -> sensor extrinsics."""

    cameras: dict = field(default_factory=dict)  # name -> CameraModel
    mounts: dict = field(default_factory=dict)  # name -> (FrameConvention, RigidTransform)

    def extrinsic(self, name: str) -> RigidTransform:
        if name in self.cameras:
            return self.cameras[name].extrinsic
        return self.mounts[name][1]

    def to_dict(self) -> dict:
        sensors = {}
        for name, cam in self.cameras.items():
            sensors[name] = {
                "convention": FrameConvention.CAMERA_RDF.value,
                "intrinsics": cam.intrinsics_dict(),
                "extrinsic": cam.extrinsic.matrix.ravel().tolist(),
            }
        for name, (conv, tf) in self.mounts.items():
            sensors[name] = {"convention": conv.value, "extrinsic": tf.matrix.ravel().tolist()}
        return {
            "euler_order": EULER_ORDER,
            "world_frame": "ENU (World-ESU with south axis negated)",
            "extrinsic_direction": "world_to_sensor",
            "extrinsic_layout": "4x4 row-major",
            "sensors": dict(sorted(sensors.items())),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Calibration":
        if data.get("euler_order") != EULER_ORDER:
            raise GeometryError(f"unsupported euler order {data.get('euler_order')!r}")
        calib = cls()
        for name, entry in data["sensors"].items():
            conv = FrameConvention(entry["convention"])
            tf = RigidTransform.from_matrix(np.array(entry["extrinsic"], dtype=float).reshape(4, 4))
            if "intrinsics" in entry:
                k = entry["intrinsics"]
                calib.cameras[name] = CameraModel(k["fx"], k["fy"], k["cx"], k["cy"],
                                                  int(k["width"]), int(k["height"]), tf)
            else:
                calib.mounts[name] = (conv, tf)
        return calib

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "Calibration":
        return cls.from_dict(json.loads(Path(path).read_text()))
