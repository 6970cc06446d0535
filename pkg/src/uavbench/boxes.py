"""2D/3D box types and overlap measures."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Unit-cube corner signs, local axes ordered (forward, left, up).
_CORNER_SIGNS = np.array([[sx, sy, sz] for sx in (1, -1) for sy in (1, -1) for sz in (1, -1)], dtype=float)


@dataclass(frozen=True)
class BBox3D:
    """Oriented 3D box.

    ``size`` is (w, h, l). The columns of ``rotation`` are the box's local
    forward, left and up axes, along which the extents are l, w and h.
    """

    center: np.ndarray
    size: tuple
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    instance_id: int = -1
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(3))
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float).reshape(3, 3))
        size = tuple(float(x) for x in self.size)
        if len(size) != 3 or min(size) <= 0:
            raise ValueError(f"box size components must be positive, got {size}")
        object.__setattr__(self, "size", size)

    @property
    def half_extents(self) -> np.ndarray:
        w, h, l = self.size
        return np.array([l, w, h]) / 2.0

    def corners(self) -> np.ndarray:
        local = _CORNER_SIGNS * self.half_extents
        return local @ self.rotation.T + self.center

    def transformed(self, tf) -> "BBox3D":
        return BBox3D(tf.apply(self.center), self.size, tf.rotation @ self.rotation,
                      self.instance_id, self.label)

    @property
    def volume(self) -> float:
        return float(np.prod(self.size))


@dataclass(frozen=True)
class BBox2D:
    u_min: float
    v_min: float
    u_max: float
    v_max: float
    instance_id: int = -1

    def __post_init__(self):
        if not (self.u_min < self.u_max and self.v_min < self.v_max):
            raise ValueError(f"degenerate 2D box {self.as_array()}")

    def as_array(self) -> np.ndarray:
        return np.array([self.u_min, self.v_min, self.u_max, self.v_max], dtype=float)

    @property
    def center(self) -> np.ndarray:
        return np.array([(self.u_min + self.u_max) / 2.0, (self.v_min + self.v_max) / 2.0])

    @property
    def wh(self) -> np.ndarray:
        return np.array([self.u_max - self.u_min, self.v_max - self.v_min])

    @property
    def area(self) -> float:
        return float((self.u_max - self.u_min) * (self.v_max - self.v_min))


def iou_2d(a, b) -> float:
    """IoU of axis-aligned boxes given as BBox2D or [u0, v0, u1, v1]."""
    a = a.as_array() if isinstance(a, BBox2D) else np.asarray(a, dtype=float)
    b = b.as_array() if isinstance(b, BBox2D) else np.asarray(b, dtype=float)
    iw = min(a[2], b[2]) - max(a[0], b[0])
    ih = min(a[3], b[3]) - max(a[1], b[1])
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return float(inter / union) if union > 0 else 0.0


def polygon_area(poly: np.ndarray) -> float:
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def _ccw(poly: np.ndarray) -> np.ndarray:
    x, y = poly[:, 0], poly[:, 1]
    signed = np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))
    return poly if signed >= 0 else poly[::-1]


def clip_convex(subject: np.ndarray, clip: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman intersection of two convex polygons."""
    out = list(_ccw(np.asarray(subject, dtype=float)))
    clip = _ccw(np.asarray(clip, dtype=float))
    for i in range(len(clip)):
        if not out:
            break
        a, b = clip[i], clip[(i + 1) % len(clip)]
        edge = b - a

        def side(p):
            return edge[0] * (p[1] - a[1]) - edge[1] * (p[0] - a[0])

        inp, out = out, []
        for j in range(len(inp)):
            cur, prev = inp[j], inp[j - 1]
            sc, sp = side(cur), side(prev)
            if sc >= 0:
                if sp < 0:
                    out.append(prev + (cur - prev) * (sp / (sp - sc)))
                out.append(cur)
            elif sp >= 0:
                out.append(prev + (cur - prev) * (sp / (sp - sc)))
    return np.array(out).reshape(-1, 2)


def _footprint(box: BBox3D, ground_axes=(0, 2)) -> np.ndarray:
    """Heading-aligned footprint rectangle in the ground plane."""
    fwd = box.rotation[:, 0]
    heading = math.atan2(fwd[ground_axes[1]], fwd[ground_axes[0]])
    w, _, l = box.size
    c, s = math.cos(heading), math.sin(heading)
    local = np.array([[l, w], [-l, w], [-l, -w], [l, -w]]) / 2.0
    rot = np.array([[c, -s], [s, c]])
    return local @ rot.T + box.center[list(ground_axes)]


def iou_3d(a: BBox3D, b: BBox3D, up_axis: int = 1) -> float:
    """Oriented 3D IoU: footprint polygon overlap times vertical overlap.

    Defaults to the camera RDF frame (ground plane x-z, vertical y). Boxes
    are treated as upright with the heading of their forward axis.
    """
    ground = tuple(i for i in range(3) if i != up_axis)
    inter_poly = clip_convex(_footprint(a, ground), _footprint(b, ground))
    area = polygon_area(inter_poly)
    if area <= 0:
        return 0.0
    ha, hb = a.size[1] / 2.0, b.size[1] / 2.0
    lo = max(a.center[up_axis] - ha, b.center[up_axis] - hb)
    hi = min(a.center[up_axis] + ha, b.center[up_axis] + hb)
    if hi <= lo:
        return 0.0
    inter = area * (hi - lo)
    union = a.volume + b.volume - inter
    return float(inter / union)
